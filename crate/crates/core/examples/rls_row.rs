//! One RLS row update by hand, and the identity it maintains:
//! `M·x` equals the exponentially weighted sum of `y·v` over all updates.

use ndarray::Array1;
use olstec::linalg::SpdSolver;
use olstec::tracker::RlsParams;
use olstec::{RowRlsState, Variant};

fn main() -> olstec::Result<()> {
    let (lambda, mu) = (0.8, 0.1);
    let params = RlsParams { lambda, mu, window_weight: 0.0 };
    let mut state = RowRlsState::identity_scaled(Variant::Full, 2, mu);
    let mut x = vec![1.0, -1.0];
    let mut s = state.matrix().dot(&Array1::from(x.clone()));
    let mut solver = SpdSolver::new(2);

    let steps: [&[(f64, [f64; 2])]; 3] = [&[(1.0, [1.0, 0.5]), (0.2, [0.0, 1.0])], &[], &[(-0.5, [2.0, -1.0])]];
    for (t, pairs) in steps.iter().enumerate() {
        state.update(&mut x, pairs.iter().map(|(y, v)| (*y, &v[..])), std::iter::empty(), &params, &mut solver)?;
        s = s * lambda + pairs.iter().fold(Array1::<f64>::zeros(2), |acc, (y, v)| acc + Array1::from(v.to_vec()) * *y);
        let lhs = state.matrix().dot(&Array1::from(x.clone()));
        println!("t={}  x = {:?}  M·x = {:?}  s = {:?}", t + 1, x, lhs.to_vec(), s.to_vec());
    }
    Ok(())
}
