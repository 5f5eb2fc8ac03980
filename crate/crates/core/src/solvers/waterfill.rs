use std::f64::consts::LN_2;

/// Powers and multiplier of a single-transmitter water-filling allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Waterfill {
    pub powers: Vec<f64>,
    /// `None` when the budget is zero or no state has a positive gain.
    pub nu: Option<f64>,
}

/// Maximizes `Σ w_i · bw · log2(1 + g_i P_i / bw)` subject to
/// `Σ w_i P_i <= budget`: `P_i = (bw / (ν ln 2) − bw / g_i)⁺`.
///
/// The level is found exactly by sorting the inverse gains.
pub fn waterfill(gains: &[f64], weights: &[f64], budget: f64, bandwidth: f64) -> Waterfill {
    assert_eq!(gains.len(), weights.len());
    let n = gains.len();
    let mut usable: Vec<(f64, f64)> = gains
        .iter()
        .zip(weights)
        .filter(|(&g, &w)| g > 0.0 && w > 0.0)
        .map(|(&g, &w)| (bandwidth / g, w))
        .collect();
    if !(budget > 0.0) || usable.is_empty() {
        return Waterfill {
            powers: vec![0.0; n],
            nu: None,
        };
    }
    usable.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (mut wsum, mut csum) = (0.0, 0.0);
    let mut level = 0.0;
    for (m, &(c, w)) in usable.iter().enumerate() {
        wsum += w;
        csum += w * c;
        level = (budget + csum) / wsum;
        match usable.get(m + 1) {
            Some(&(next, _)) if level > next => continue,
            _ => break,
        }
    }

    let powers = gains
        .iter()
        .map(|&g| {
            if g > 0.0 {
                (level - bandwidth / g).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    Waterfill {
        powers,
        nu: Some(bandwidth / (level * LN_2)),
    }
}
