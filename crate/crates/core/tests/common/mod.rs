#![allow(dead_code)]

use conjunction_margin::geometry::Ellipsoid;
use conjunction_margin::linalg::{Mat6, SymMat3, Vec3};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

/// `L` with `L Lᵀ = Σ`, so `center + L u` is on the boundary for unit `u`.
fn cov_factor(e: &Ellipsoid) -> [[f64; 3]; 3] {
    e.covariance().cholesky().expect("covariance is SPD").l
}

fn apply(l: &[[f64; 3]; 3], u: Vec3) -> Vec3 {
    Vec3::new(
        l[0][0] * u[0] + l[0][1] * u[1] + l[0][2] * u[2],
        l[1][0] * u[0] + l[1][1] * u[1] + l[1][2] * u[2],
        l[2][0] * u[0] + l[2][1] * u[1] + l[2][2] * u[2],
    )
}

pub fn boundary_point(e: &Ellipsoid, rng: &mut impl Rng) -> Vec3 {
    e.center() + apply(&cov_factor(e), unit_vector(rng))
}

pub fn interior_point(e: &Ellipsoid, rng: &mut impl Rng) -> Vec3 {
    let r: f64 = rng.gen::<f64>().cbrt();
    e.center() + apply(&cov_factor(e), unit_vector(rng) * r)
}

pub fn random_spd(rng: &mut impl Rng) -> SymMat3 {
    let g: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-2.0..2.0)));
    let mut gtg = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            gtg[i][j] = (0..3).map(|k| g[k][i] * g[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
        }
    }
    SymMat3::from_mat3_symmetrized(&gtg)
}

/// Coefficients `c₀..c₆` of `det(λI - M) = Σ cₖ λᵏ` by Faddeev-LeVerrier.
pub fn char_poly(m: &Mat6) -> [f64; 7] {
    let n = 6;
    let a = m.0;
    let mut coeffs = [0.0; 7];
    coeffs[n] = 1.0;
    let mut mk = [[0.0; 6]; 6];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I, c_{n-k} = -tr(A M_k) / k
        let mut next = [[0.0; 6]; 6];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * mk[l][j]).sum::<f64>();
            }
            next[i][i] += coeffs[n - k + 1];
        }
        mk = next;
        let tr: f64 = (0..n).map(|i| (0..n).map(|l| a[i][l] * mk[l][i]).sum::<f64>()).sum();
        coeffs[n - k] = -tr / k as f64;
    }
    coeffs
}

fn poly_eval(c: &[f64; 7], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// Roots of the monic degree-6 polynomial by Durand-Kerner, then polished
/// by Newton on the polynomial.
pub fn poly_roots(c: &[f64; 7]) -> [Complex64; 6] {
    let scale = 1.0 + c.iter().take(6).fold(0.0f64, |m, v| m.max(v.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: [Complex64; 6] = std::array::from_fn(|i| seed.powu(i as u32) * scale);
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..6 {
            let (p, _) = poly_eval(c, z[i]);
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..6 {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            let step = p / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * scale {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..5 {
            let (p, dp) = poly_eval(c, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            *zi -= p / dp;
        }
    }
    z
}

/// Root of a continuous decreasing function on `[lo, hi]` by bisection.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Writer that forwards to `inner` and records every byte in `log`.
pub struct Tee<W> {
    pub inner: W,
    pub log: std::sync::Arc<std::sync::Mutex<Vec<u8>>>,
}

impl<W: std::io::Write> std::io::Write for Tee<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.log.lock().unwrap().extend_from_slice(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Both sides of a loopback TCP session.
pub struct TcpRun {
    pub chaser: conjunction_margin::fista::AgentOutcome,
    pub target: conjunction_margin::fista::AgentOutcome,
    pub chaser_xs: Vec<Vec3>,
    pub target_xs: Vec<Vec3>,
    /// Bytes written by the chaser, then by the target.
    pub chaser_traffic: Vec<u8>,
    pub target_traffic: Vec<u8>,
}

/// Runs the chaser and target agents on two threads joined by a loopback
/// TCP connection, recording iterates and all bytes sent.
pub fn tcp_session(
    c: &conjunction_margin::geometry::Conjunction,
    opts: &conjunction_margin::fista::FistaOptions,
) -> TcpRun {
    use conjunction_margin::fista::wire::run_session;
    use conjunction_margin::fista::AgentRole;
    use std::io::BufReader;
    use std::net::{TcpListener, TcpStream};
    use std::sync::{Arc, Mutex};

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let side = |role: AgentRole, stream: TcpStream, e: Ellipsoid| {
        stream.set_nodelay(true).unwrap();
        let log = Arc::new(Mutex::new(Vec::new()));
        let reader = BufReader::new(stream.try_clone().unwrap());
        let writer = Tee { inner: stream, log: log.clone() };
        let mut xs = Vec::new();
        let outcome = run_session(reader, writer, role, e, opts, |s| xs.push(s.x)).unwrap();
        let bytes = log.lock().unwrap().clone();
        (outcome, xs, bytes)
    };
    std::thread::scope(|scope| {
        let chaser = scope.spawn(|| {
            let (stream, _) = listener.accept().unwrap();
            side(AgentRole::Chaser, stream, c.chaser)
        });
        let target = scope.spawn(|| side(AgentRole::Target, TcpStream::connect(addr).unwrap(), c.target));
        let (chaser, chaser_xs, chaser_traffic) = chaser.join().unwrap();
        let (target, target_xs, target_traffic) = target.join().unwrap();
        TcpRun { chaser, target, chaser_xs, target_xs, chaser_traffic, target_traffic }
    })
}

/// Checks that `traffic` is a handshake followed by round and final
/// messages carrying only the allowed keys, and that no entry of the
/// sender's shape or covariance matrix appears in it.
pub fn check_traffic(traffic: &[u8], own: &Ellipsoid) -> Result<(), String> {
    let text = std::str::from_utf8(traffic).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 2 {
        return Err(format!("only {} lines", lines.len()));
    }
    for (i, line) in lines.iter().enumerate() {
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("line {i}: {e}"))?;
        let obj = value.as_object().ok_or(format!("line {i} is not an object"))?;
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        let allowed: &[&str] = if i == 0 {
            &["max_iter", "role", "tol", "v"]
        } else if i + 1 == lines.len() {
            &["done", "k", "x"]
        } else {
            &["halt", "k", "p"]
        };
        if keys != allowed {
            return Err(format!("line {i} has keys {keys:?}"));
        }
    }
    for m in [own.shape(), own.covariance()] {
        for v in m.entries() {
            let entry = serde_json::to_string(&v).unwrap();
            if entry.len() > 6 && text.contains(&entry) {
                return Err(format!("matrix entry {entry} leaked"));
            }
        }
    }
    Ok(())
}

/// Ten unit-covariance sphere pairs with hard-body radii, far from the
/// origin, paired with whether each is a concern (`margin < cr + tr`). The
/// margin of each pair is `max(0, d - 2)` for center separation `d`.
pub fn concern_fixture() -> Vec<(conjunction_margin::geometry::Conjunction, bool)> {
    use conjunction_margin::geometry::Conjunction;
    // (separation, chaser radius, target radius)
    let cases = [
        (1.0, 0.01, 0.01),
        (2.0, 0.01, 0.01),
        (2.5, 0.3, 0.3),
        (2.5, 0.2, 0.2),
        (3.2, 0.7, 0.6),
        (3.2, 0.5, 0.6),
        (4.0, 1.0, 1.5),
        (4.0, 1.0, 0.9),
        (12.0, 5.0, 5.5),
        (12.0, 0.005, 0.02),
    ];
    let base = Vec3::new(6878.137, -1203.5, 422.25);
    let mut rng = rng(1234);
    cases
        .iter()
        .enumerate()
        .map(|(i, &(d, cr, tr))| {
            let dir = unit_vector(&mut rng);
            let chaser = Ellipsoid::sphere(base, 1.0).unwrap();
            let target = Ellipsoid::sphere(base + dir * d, 1.0).unwrap();
            let c = Conjunction::new(format!("s{i}"), chaser, target, cr, tr, None).unwrap();
            let margin = (d - 2.0f64).max(0.0);
            (c, margin < cr + tr)
        })
        .collect()
}
