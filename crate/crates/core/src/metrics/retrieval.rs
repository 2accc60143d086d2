use crate::error::{Error, Result};
use crate::nn::{squared_distance, Matrix};

/// `⌈ratio · n⌉`, at least one.
pub fn retrieved_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).ceil() as usize).clamp(1, n.max(1))
}

/// Mean retrieval precision over query classes, as a percentage.
///
/// Query `q` belongs to class `query_classes[q]`. Every gallery image is
/// ranked by Euclidean distance to the query (ties by index), the top
/// `⌈ratio · n_c⌉` are retrieved and the fraction with label `c` is that
/// class's precision.
pub fn retrieval_precision(
    queries: &Matrix,
    query_classes: &[usize],
    gallery: &Matrix,
    labels: &[usize],
    ratio: f64,
) -> Result<f64> {
    if queries.rows() != query_classes.len() || gallery.rows() != labels.len() {
        return Err(Error::Usage("row and label counts differ".into()));
    }
    if queries.cols() != gallery.cols() {
        return Err(Error::Usage(format!(
            "query dimension {} but gallery dimension {}",
            queries.cols(),
            gallery.cols()
        )));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("retrieval ratio {ratio} outside (0, 1]")));
    }
    if queries.rows() == 0 {
        return Err(Error::Config("no retrieval queries".into()));
    }
    let mut total = 0.0;
    for (q, &c) in queries.row_iter().zip(query_classes) {
        let n_c = labels.iter().filter(|&&y| y == c).count();
        if n_c == 0 {
            return Err(Error::Config(format!("class {c} has no gallery images")));
        }
        let mut order: Vec<(f64, usize)> = gallery
            .row_iter()
            .enumerate()
            .map(|(i, g)| (squared_distance(q, g), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let take = retrieved_count(ratio, n_c);
        let hits = order[..take].iter().filter(|&&(_, i)| labels[i] == c).count();
        total += hits as f64 / take as f64;
    }
    Ok(100.0 * total / queries.rows() as f64)
}
