//! Loading the surname pool.
//!
//! Two formats are accepted:
//!
//! * the census surname table (`name,rank,count,...,pctwhite,pctblack,
//!   pctapi,pctaian,pct2prace,pcthispanic`), from which the top names of each
//!   of five groups are taken by estimated group count (`count × pct / 100`);
//! * a plain list with a `surname` column (and optionally `group`), or one
//!   name per line without a header.

use std::path::Path;

use anyhow::{bail, Context, Result};
use usersim_core::persona::SurnamePool;

/// Names per group taken from a census table.
pub const PER_GROUP: usize = 500;

const GROUP_COLUMNS: [&str; 5] = ["pctwhite", "pctblack", "pctapi", "pctaian", "pcthispanic"];

/// Small built-in pool used when no table is configured.
pub const BUILTIN: &str = include_str!("../fixtures/surnames.csv");

pub fn load(path: &Path) -> Result<SurnamePool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading surname table {}", path.display()))?;
    parse(&text, PER_GROUP).with_context(|| format!("surname table {}", path.display()))
}

pub fn builtin() -> SurnamePool {
    parse(BUILTIN, PER_GROUP).expect("built-in surname list parses")
}

pub fn parse(text: &str, per_group: usize) -> Result<SurnamePool> {
    let first = text.lines().next().unwrap_or_default().to_ascii_lowercase();
    let headers: Vec<&str> = first.split(',').map(str::trim).collect();
    let names = if GROUP_COLUMNS.iter().all(|c| headers.contains(c)) && headers.contains(&"count") {
        census_names(text, per_group)?
    } else if let Some(col) = headers.iter().position(|h| *h == "surname" || *h == "name") {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if let Some(n) = rec.get(col) {
                out.push(n.trim().to_string());
            }
        }
        out
    } else {
        text.lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect()
    };
    if names.is_empty() {
        bail!("no surnames found");
    }
    Ok(SurnamePool::new(names)?)
}

fn census_names(text: &str, per_group: usize) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("missing column {name}"))
    };
    let name_col = col("name")?;
    let count_col = col("count")?;
    let group_cols: Vec<usize> = GROUP_COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;

    let mut rows: Vec<(String, f64, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let name = rec.get(name_col).unwrap_or_default().trim().to_string();
        if name.is_empty() || name.eq_ignore_ascii_case("all other names") {
            continue;
        }
        let count: f64 = rec.get(count_col).unwrap_or_default().trim().parse().unwrap_or(0.0);
        // Suppressed cells are marked "(S)" and count as zero.
        let pcts = group_cols
            .iter()
            .map(|&c| rec.get(c).unwrap_or_default().trim().parse().unwrap_or(0.0))
            .collect();
        rows.push((name, count, pcts));
    }

    let mut out = Vec::new();
    for g in 0..GROUP_COLUMNS.len() {
        let mut ranked: Vec<(&str, f64)> = rows.iter().map(|(n, c, p)| (n.as_str(), c * p[g] / 100.0)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        out.extend(ranked.into_iter().take(per_group).map(|(n, _)| n.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn census_format_takes_top_per_group() {
        let table = "name,rank,count,prop100k,cum_prop100k,pctwhite,pctblack,pctapi,pctaian,pct2prace,pcthispanic\n\
SMITH,1,2442977,828.19,828.19,70.9,23.11,0.5,0.89,2.19,2.4\n\
GARCIA,6,1166120,395.32,3125.9,5.38,0.45,1.41,0.47,0.26,92.03\n\
NGUYEN,38,437645,148.37,10223.6,0.93,0.07,97.42,0.03,1.3,0.25\n\
BEGAY,2000,30000,7.1,1,1.2,(S),(S),96.6,1.5,0.5\n";
        let pool = parse(table, 1).unwrap();
        assert_eq!(pool.names(), ["Smith", "Nguyen", "Begay", "Garcia"]);
    }

    #[test]
    fn plain_lists() {
        assert_eq!(
            parse("surname,group\nLI,api\nGUZMAN,hispanic\n", 500).unwrap().names(),
            ["Li", "Guzman"]
        );
        assert_eq!(parse("Li\nGuzman\n\n", 500).unwrap().len(), 2);
        assert!(parse("", 500).is_err());
        let b = builtin();
        assert!(b.contains("Guzman") && b.contains("Li"));
    }
}
