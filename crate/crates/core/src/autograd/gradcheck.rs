use super::tape::{Tape, Var};
use super::tensor::{Real, Tensor};
use super::AutogradError;

/// Outcome of [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// (input, element, analytic, numeric) of the worst component.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub components: usize,
}

/// Relative error with the denominator floored at `1e-8`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn evaluate<T: Real, F>(f: &F, points: &[Tensor<T>], with_grad: bool) -> Result<(Tape<T>, Vec<Var>, Var), AutogradError>
where
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var, AutogradError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> =
        points.iter().map(|p| if with_grad { tape.param(p.clone()) } else { tape.constant(p.clone()) }).collect();
    let out = f(&mut tape, &vars)?;
    let value = tape.value(out).item().ok_or_else(|| AutogradError::NotScalar(tape.value(out).shape().to_vec()))?;
    if !value.is_finite() {
        return Err(AutogradError::NonFinite);
    }
    Ok((tape, vars, out))
}

/// Compares reverse-mode gradients of the scalar function `f` at `points`
/// against central differences `(f(x+h) - f(x-h)) / 2h`, componentwise.
pub fn gradient_check<T: Real, F>(f: F, points: &[Tensor<T>], h: T) -> Result<GradCheck, AutogradError>
where
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var, AutogradError>,
{
    check_with(&f, points, |eval| {
        let plus = eval(h)?;
        let minus = eval(-h)?;
        Ok((plus - minus).to_f64() / (2.0 * h.to_f64()))
    })
}

/// Like [`gradient_check`], but each numeric derivative is a Ridders
/// extrapolation of central differences starting from step `h` and
/// shrinking it by 1.4 per stage. Small components come out accurate to
/// around 1e-14, well past what a single step can reach in f64.
pub fn gradient_check_extrapolated<T: Real, F>(f: F, points: &[Tensor<T>], h: T) -> Result<GradCheck, AutogradError>
where
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var, AutogradError>,
{
    const SHRINK: f64 = 1.4;
    const STAGES: usize = 10;
    check_with(&f, points, |eval| {
        let mut step = h.to_f64();
        let central = |eval: &mut dyn FnMut(T) -> Result<T, AutogradError>, step: f64| -> Result<f64, AutogradError> {
            let s = T::lit(step);
            let plus = eval(s)?;
            let minus = eval(-s)?;
            Ok((plus - minus).to_f64() / (2.0 * s.to_f64()))
        };
        let mut table = vec![vec![0.0; STAGES]; STAGES];
        table[0][0] = central(eval, step)?;
        let mut best = table[0][0];
        let mut err = f64::INFINITY;
        for i in 1..STAGES {
            step /= SHRINK;
            table[0][i] = central(eval, step)?;
            let mut fac = SHRINK * SHRINK;
            for j in 1..=i {
                table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
                fac *= SHRINK * SHRINK;
                let e = (table[j][i] - table[j - 1][i]).abs().max((table[j][i] - table[j - 1][i - 1]).abs());
                if e <= err {
                    err = e;
                    best = table[j][i];
                }
            }
            if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
                break;
            }
        }
        Ok(best)
    })
}

fn check_with<T: Real, F, N>(f: &F, points: &[Tensor<T>], mut numeric: N) -> Result<GradCheck, AutogradError>
where
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var, AutogradError>,
    N: FnMut(&mut dyn FnMut(T) -> Result<T, AutogradError>) -> Result<f64, AutogradError>,
{
    let (tape, vars, out) = evaluate(f, points, true)?;
    let grads = tape.backward(out)?;
    let mut report = GradCheck { max_rel_error: 0.0, worst: None, components: 0 };
    let mut probe: Vec<Tensor<T>> = points.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(&tape, *var);
        for ei in 0..points[pi].len() {
            let x = points[pi].data()[ei];
            let mut eval = |delta: T| -> Result<T, AutogradError> {
                probe[pi].data_mut()[ei] = x + delta;
                let (t, _, o) = evaluate(f, &probe, false)?;
                Ok(t.value(o).data()[0])
            };
            let n = numeric(&mut eval)?;
            probe[pi].data_mut()[ei] = x;
            let a = analytic.data()[ei].to_f64();
            let err = relative_error(a, n);
            report.components += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((pi, ei, a, n));
            }
        }
    }
    Ok(report)
}
