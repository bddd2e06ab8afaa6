//! Finite-difference weights on arbitrary node sets.
//!
//! Character fields are built from radial derivatives of sampled profiles,
//! so the stencils must cope with non-uniform grids. Weights come from
//! Fornberg's recursion (Math. Comp. 51, 1988), which yields the exact
//! interpolating-polynomial derivative weights for any node placement.

/// First-derivative weights at `x0` for the given nodes.
///
/// Exact for polynomials of degree `< nodes.len()`, i.e. order
/// `nodes.len() - 1` accuracy on smooth data.
pub fn first_derivative_weights(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    assert!(n >= 2, "need at least two nodes for a derivative");
    // c[k][j]: weight of node j for the k-th derivative (k = 0, 1).
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut a = 1.0;
    for i in 1..n {
        let mut b = 1.0;
        for j in 0..i {
            let dx = nodes[i] - nodes[j];
            b *= dx;
            if j == i - 1 {
                c[i][1] = a * (c[i - 1][0] - (nodes[i - 1] - x0) * c[i - 1][1]) / b;
                c[i][0] = -a * (nodes[i - 1] - x0) * c[i - 1][0] / b;
            }
            c[j][1] = ((nodes[i] - x0) * c[j][1] - c[j][0]) / dx;
            c[j][0] = (nodes[i] - x0) * c[j][0] / dx;
        }
        a = b;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Radial derivative of sampled values: five-point (fourth-order) centered
/// stencils in the interior, three-point (second-order) stencils at the two
/// cells nearest each edge. Grids shorter than five cells fall back to
/// three-point stencils throughout.
pub fn radial_derivative(radii: &[f64], values: &[f64]) -> Vec<f64> {
    let n = radii.len();
    assert_eq!(n, values.len());
    assert!(n >= 3, "need at least three cells to differentiate");
    let mut out = vec![0.0; n];
    for i in 0..n {
        let (lo, hi) = if n >= 5 && i >= 2 && i + 2 < n {
            (i - 2, i + 3)
        } else {
            // shifted three-point stencil hugging the nearer edge
            let lo = i.saturating_sub(1).min(n - 3);
            (lo, lo + 3)
        };
        let w = first_derivative_weights(radii[i], &radii[lo..hi]);
        out[i] = w.iter().zip(&values[lo..hi]).map(|(wi, vi)| wi * vi).sum();
    }
    out
}
