//! Hand-expanded one-step updates of the alpha-generating schemes for the
//! two built-in models, solved by plain fixed-point iteration.

#![allow(dead_code)]

use stochpoisson::models::slv::LvParams;
use stochpoisson::models::srb::RigidBodyParams;

fn solve(z0: (f64, f64), update: impl Fn(f64, f64) -> (f64, f64)) -> (f64, f64) {
    let (mut p, mut q) = z0;
    for _ in 0..200 {
        let (np, nq) = update(p, q);
        let done = (np - p).abs().max((nq - q).abs()) < 1e-14;
        p = np;
        q = nq;
        if done {
            break;
        }
    }
    (p, q)
}

pub fn rigid_body_expanded(params: &RigidBodyParams, c: f64, z0: (f64, f64), h: f64, dw: f64, alpha: f64) -> (f64, f64) {
    let RigidBodyParams { i1, i2, i3, c1 } = *params;
    let c_alpha = (alpha - 0.5) * (1.0 / i1 - 1.0 / i3);
    let (p0, q0) = z0;
    solve(z0, |p1, q1| {
        let pb = (1.0 - alpha) * p0 + alpha * p1;
        let qb = alpha * q0 + (1.0 - alpha) * q1;
        let k = 1.0 / (2.0 * i3) - 1.0 / (2.0 * i1);
        let g = 1.0 / i2 - qb.cos().powi(2) / i1 - qb.sin().powi(2) / i3;
        let u = 2.0 * c - pb * pb;
        let p = p0 - k * u * (2.0 * qb).sin() * (h + c1 * dw)
            + c1 * c1 * c_alpha * u * pb * ((2.0 * qb).cos() * g - (2.0 * qb).sin().powi(2) * k) * dw * dw;
        let q = q0 + g * pb * (h + c1 * dw) + c1 * c1 * c_alpha * g * (1.5 * pb * pb - c) * (2.0 * qb).sin() * dw * dw;
        (p, q)
    })
}

pub fn lotka_volterra_expanded(params: &LvParams, c: f64, z0: (f64, f64), h: f64, dw: f64, alpha: f64) -> (f64, f64) {
    let LvParams { a, b, r, nu, mu, c2 } = *params;
    let c_alpha = c2 * c2 * (alpha - 0.5);
    let (p0, q0) = z0;
    solve(z0, |p1, q1| {
        let pb = (1.0 - alpha) * p0 + alpha * p1;
        let qb = alpha * q0 + (1.0 - alpha) * q1;
        let arg = r * (c - pb - b * qb);
        let e = arg.exp();
        let x = -2.0 * a * a * b.powi(4) * r.powi(3) * (2.0 * arg).exp()
            - (r * b + 1.0) * a * b * r * (arg - qb).exp()
            - r * b * (nu * a * b * r + mu * a * b * b * r) * e
            - a * a * b.powi(3) * r * r * (arg + pb).exp()
            - a * (pb - qb).exp()
            - mu * (-qb).exp();
        let y = -2.0 * a * a * b.powi(3) * r.powi(3) * (2.0 * arg).exp()
            - a * b * r * r * (arg - qb).exp()
            - (nu * a * b * r * r + mu * a * b * b * r * r) * e
            + (1.0 - r) * a * a * b * b * r * (arg + pb).exp()
            + a * (pb - qb).exp()
            + a * nu * pb.exp();
        let p = p0 - (h + c2 * dw) * (a * b * b * r * e + (-qb).exp() + nu) - c_alpha * dw * dw * x;
        let q = q0 + (h + c2 * dw) * (a * b * r * e + a * pb.exp() + mu) + c_alpha * dw * dw * y;
        (p, q)
    })
}
