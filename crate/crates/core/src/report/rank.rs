use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (city, provider) score pair fed to [`rank_cities`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub city: String,
    pub provider: String,
    pub emd: f64,
    pub kl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub city: String,
    pub provider: String,
    pub emd: f64,
    pub kl: f64,
    pub emd_rank: usize,
    pub kl_rank: usize,
}

/// Rows sorted by `kl_rank`; each rank column is a permutation of `1..=N`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub rows: Vec<RankedRow>,
}

pub const RANKING_CSV_HEADER: &str = "city,provider,emd_e-3,kl,emd_rank,kl_rank";

/// Ranks each score column ascending (smaller is closer to the prior).
/// Equal scores are ordered by `(city, provider)`.
pub fn rank_cities(results: &[ScoreRow]) -> Result<RankingTable> {
    if results.is_empty() {
        return Err(Error::validation("nothing to rank"));
    }
    if let Some(r) = results.iter().find(|r| !r.emd.is_finite() || !r.kl.is_finite()) {
        return Err(Error::validation(format!(
            "non-finite score for {} / {}: emd {}, kl {}",
            r.city, r.provider, r.emd, r.kl
        )));
    }
    let ranks = |score: fn(&ScoreRow) -> f64| -> Vec<usize> {
        let mut order: Vec<usize> = (0..results.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&results[a], &results[b]);
            score(ra)
                .partial_cmp(&score(rb))
                .unwrap_or(Ordering::Equal)
                .then_with(|| ra.city.cmp(&rb.city))
                .then_with(|| ra.provider.cmp(&rb.provider))
        });
        let mut rank = vec![0; results.len()];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos + 1;
        }
        rank
    };
    let emd_rank = ranks(|r| r.emd);
    let kl_rank = ranks(|r| r.kl);
    let mut rows: Vec<RankedRow> = results
        .iter()
        .enumerate()
        .map(|(i, r)| RankedRow {
            city: r.city.clone(),
            provider: r.provider.clone(),
            emd: r.emd,
            kl: r.kl,
            emd_rank: emd_rank[i],
            kl_rank: kl_rank[i],
        })
        .collect();
    rows.sort_by_key(|r| r.kl_rank);
    Ok(RankingTable { rows })
}

impl RankingTable {
    /// EMD in units of 10⁻³ and KL, both to three significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RANKING_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&r.city),
                csv_field(&r.provider),
                sig_digits(r.emd * 1e3, 3),
                sig_digits(r.kl, 3),
                r.emd_rank,
                r.kl_rank
            );
        }
        out
    }

    pub fn get(&self, city: &str, provider: &str) -> Option<&RankedRow> {
        self.rows.iter().find(|r| r.city == city && r.provider == provider)
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Fixed-point rendering of `v` rounded to `digits` significant digits.
pub fn sig_digits(v: f64, digits: u32) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = digits.max(1) as i32;
    let step = |m: i32| 10f64.powi(m - digits + 1);
    let mut magnitude = v.abs().log10().floor() as i32;
    let mut rounded = (v / step(magnitude)).round() * step(magnitude);
    // Rounding can carry into a new leading digit (9.996 -> 10.0).
    if rounded.abs() >= 10f64.powi(magnitude + 1) {
        magnitude += 1;
        rounded = (v / step(magnitude)).round() * step(magnitude);
    }
    format!("{:.*}", (digits - 1 - magnitude).max(0) as usize, rounded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(city: &str, provider: &str, emd: f64, kl: f64) -> ScoreRow {
        ScoreRow {
            city: city.into(),
            provider: provider.into(),
            emd,
            kl,
        }
    }

    #[test]
    fn single_row() {
        let t = rank_cities(&[row("A", "GSV", 1.0, 2.0)]).unwrap();
        assert_eq!((t.rows[0].emd_rank, t.rows[0].kl_rank), (1, 1));
    }

    #[test]
    fn ranks_and_order() {
        let t = rank_cities(&[
            row("A", "GSV", 3.0, 1.0),
            row("B", "GSV", 1.0, 3.0),
            row("C", "MLY", 2.0, 2.0),
        ])
        .unwrap();
        let names: Vec<_> = t.rows.iter().map(|r| r.city.as_str()).collect();
        assert_eq!(names, ["A", "C", "B"]);
        assert_eq!(t.get("A", "GSV").unwrap().emd_rank, 3);
        assert_eq!(t.get("B", "GSV").unwrap().emd_rank, 1);
    }

    #[test]
    fn ties_break_by_city_then_provider() {
        let t = rank_cities(&[
            row("B", "GSV", 1.0, 1.0),
            row("A", "MLY", 1.0, 1.0),
            row("A", "GSV", 1.0, 1.0),
        ])
        .unwrap();
        let keys: Vec<_> = t
            .rows
            .iter()
            .map(|r| (r.city.as_str(), r.provider.as_str(), r.emd_rank))
            .collect();
        assert_eq!(keys, [("A", "GSV", 1), ("A", "MLY", 2), ("B", "GSV", 3)]);
    }

    #[test]
    fn rejects_nan_and_empty() {
        assert!(rank_cities(&[row("A", "GSV", f64::NAN, 1.0)]).is_err());
        assert!(rank_cities(&[row("A", "GSV", 1.0, f64::INFINITY)]).is_err());
        assert!(rank_cities(&[]).is_err());
    }

    #[test]
    fn three_significant_digits() {
        assert_eq!(sig_digits(0.021, 3), "0.0210");
        assert_eq!(sig_digits(7.545364, 3), "7.55");
        assert_eq!(sig_digits(25.71, 3), "25.7");
        assert_eq!(sig_digits(2.705, 3), "2.71");
        assert_eq!(sig_digits(9.996, 3), "10.0");
        assert_eq!(sig_digits(1234.0, 3), "1230");
        assert_eq!(sig_digits(-0.5, 3), "-0.500");
        assert_eq!(sig_digits(0.0, 3), "0");
    }

    #[test]
    fn csv_layout() {
        let t = rank_cities(&[
            row("Los Angeles", "GSV", 0.002705, 10.339047),
            row("Kiev", "GSV", 0.000021, 7.545364),
        ])
        .unwrap();
        assert_eq!(
            t.to_csv(),
            "city,provider,emd_e-3,kl,emd_rank,kl_rank\nKiev,GSV,0.0210,7.55,1,1\nLos Angeles,GSV,2.71,10.3,2,2\n"
        );
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }

    fn rows_strategy() -> impl Strategy<Value = Vec<ScoreRow>> {
        prop::collection::vec((0u8..6, 0u8..3, 0u32..20, 0u32..20), 1..25).prop_map(|v| {
            let mut seen = std::collections::HashSet::new();
            v.into_iter()
                .filter(|(c, p, _, _)| seen.insert((*c, *p)))
                .map(|(c, p, e, k)| {
                    row(
                        &format!("city{c}"),
                        ["GSV", "MLY", "AMS"][p as usize],
                        e as f64 * 0.25,
                        k as f64 * 0.5,
                    )
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn ranks_are_permutations(rows in rows_strategy()) {
            let t = rank_cities(&rows).unwrap();
            let n = rows.len();
            let mut e: Vec<_> = t.rows.iter().map(|r| r.emd_rank).collect();
            let k: Vec<_> = t.rows.iter().map(|r| r.kl_rank).collect();
            e.sort_unstable();
            prop_assert_eq!(e, (1..=n).collect::<Vec<_>>());
            prop_assert_eq!(k, (1..=n).collect::<Vec<_>>());
        }

        #[test]
        fn invariant_under_row_permutation(rows in rows_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(rank_cities(&rows).unwrap(), rank_cities(&shuffled).unwrap());
        }

        #[test]
        fn monotone_transform_keeps_ranks(rows in rows_strategy()) {
            let t = rank_cities(&rows).unwrap();
            let transformed: Vec<_> = rows
                .iter()
                .map(|r| ScoreRow { emd: (r.emd + 1.0).ln() * 7.0 - 3.0, kl: (r.kl * 0.3).exp(), ..r.clone() })
                .collect();
            let u = rank_cities(&transformed).unwrap();
            for r in &t.rows {
                let s = u.get(&r.city, &r.provider).unwrap();
                prop_assert_eq!((r.emd_rank, r.kl_rank), (s.emd_rank, s.kl_rank));
            }
        }
    }
}
