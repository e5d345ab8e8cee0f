use crate::autodiff::PROBABILITY_FLOOR;
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

fn rows_of<T: Element>(probs: &Tensor<T>, labels: &[usize]) -> Result<(usize, usize)> {
    let (rows, classes) = match *probs.shape() {
        [r, c] => (r, c),
        ref s => {
            return Err(Error::shape(format!(
                "expected [batch, classes], got {s:?}"
            )))
        }
    };
    if labels.len() != rows {
        return Err(Error::shape(format!(
            "{} labels for {rows} rows",
            labels.len()
        )));
    }
    Ok((rows, classes))
}

/// Mean of `-ln(max(p[label], 1e-7))` over the batch, in f64.
pub fn sparse_cce_loss<T: Element>(probs: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let (rows, classes) = rows_of(probs, labels)?;
    let mut total = 0.0;
    for (row, &label) in probs.data().chunks(classes.max(1)).zip(labels) {
        let p = row
            .get(label)
            .ok_or_else(|| Error::Index(format!("label {label} outside {classes} classes")))?;
        total -= p.as_f64().max(PROBABILITY_FLOOR).ln();
    }
    Ok(if rows == 0 { 0.0 } else { total / rows as f64 })
}

/// Index of the largest entry; the first wins ties.
pub fn argmax<T: Element>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Number of rows whose argmax equals the label.
pub fn correct_count<T: Element>(probs: &Tensor<T>, labels: &[usize]) -> Result<usize> {
    let (_, classes) = rows_of(probs, labels)?;
    Ok(probs
        .data()
        .chunks(classes.max(1))
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count())
}

pub fn accuracy<T: Element>(probs: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let correct = correct_count(probs, labels)?;
    Ok(if labels.is_empty() {
        0.0
    } else {
        correct as f64 / labels.len() as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(rows: &[[f64; 5]]) -> Tensor<f64> {
        Tensor::from_f64(&[rows.len(), 5], &rows.concat()).unwrap()
    }

    #[test]
    fn loss_examples() {
        let uniform = probs(&[[0.2; 5]]);
        assert!((sparse_cce_loss(&uniform, &[3]).unwrap() - 5f64.ln()).abs() < 1e-12);
        let two = probs(&[[0.5, 0.5, 0., 0., 0.], [0.25, 0.75, 0., 0., 0.]]);
        let expected = (-(0.5f64).ln() - (0.25f64).ln()) / 2.0;
        assert!((sparse_cce_loss(&two, &[0, 0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.0397).abs() < 1e-4);
        let near = probs(&[[1.0 - 1e-9, 1e-9, 0., 0., 0.]]);
        assert!(sparse_cce_loss(&near, &[0]).unwrap() < 1e-8);
        let zero = probs(&[[1., 0., 0., 0., 0.]]);
        assert!((sparse_cce_loss(&zero, &[2]).unwrap() + PROBABILITY_FLOOR.ln()).abs() < 1e-12);
        assert!(matches!(
            sparse_cce_loss(&uniform, &[5]),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn accuracy_examples() {
        let p = probs(&[[0.9, 0.1, 0., 0., 0.], [0., 0., 0.2, 0.8, 0.]]);
        assert_eq!(accuracy(&p, &[0, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&p, &[1, 2]).unwrap(), 0.0);
        assert_eq!(accuracy(&probs(&[[0.2; 5]]), &[0]).unwrap(), 1.0);
        assert_eq!(accuracy(&probs(&[[0.2; 5]]), &[1]).unwrap(), 0.0);
    }
}
