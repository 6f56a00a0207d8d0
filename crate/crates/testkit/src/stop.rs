//! Reference stopping rules over a score list sorted in descending order.

use bgmem_core::model::QueryType;

pub struct StopParams {
    pub lambda: f64,
    pub floor_fraction: f64,
    pub precision_scale: f64,
    pub judgment_scale: f64,
    pub temperature: f64,
    pub cap: usize,
}

impl Default for StopParams {
    fn default() -> Self {
        StopParams { lambda: 0.1, floor_fraction: 0.5, precision_scale: 0.8, judgment_scale: 0.8, temperature: 1.0, cap: 50 }
    }
}

/// Selected positions.
pub fn expected_selection(scores: &[f64], policy: QueryType, p: &StopParams) -> Vec<usize> {
    if scores.is_empty() {
        return Vec::new();
    }
    let top = scores.iter().cloned().fold(f64::MIN, f64::max);
    let picked: Vec<usize> = match policy {
        QueryType::Precision => (0..scores.len()).filter(|&i| scores[i] >= p.precision_scale * top).collect(),
        QueryType::Judgement => {
            let e: Vec<f64> = scores.iter().map(|s| ((s - top) / p.temperature).exp()).collect();
            let total: f64 = e.iter().sum();
            let probs: Vec<f64> = e.iter().map(|x| x / total).collect();
            let pmax = probs.iter().cloned().fold(f64::MIN, f64::max);
            (0..scores.len()).filter(|&i| probs[i] >= p.judgment_scale * pmax).collect()
        }
        QueryType::Recall => {
            let floor = p.floor_fraction * top;
            let knee = scores.windows(2).position(|w| w[0] - w[1] > p.lambda && w[0] > floor);
            match knee {
                Some(k) => (0..=k).collect(),
                None => (0..scores.len()).filter(|&i| scores[i] > floor).collect(),
            }
        }
    };
    let mut picked: Vec<usize> = picked.into_iter().take(p.cap).collect();
    if picked.is_empty() {
        picked.push(0);
    }
    picked
}
