//! Aligned-column text rendering of reports.

use super::metrics::DasReport;
use super::robustness::RobustnessReport;

/// Left-aligned first column, right-aligned others.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = vec![line(header.to_vec())];
    out.push(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in rows {
        out.push(line(r.iter().take(cols).map(String::as_str).collect()));
    }
    out.join("\n") + "\n"
}

impl DasReport {
    pub fn to_table(&self) -> String {
        let mut rows: Vec<Vec<String>> = self
            .pairs
            .iter()
            .map(|p| vec![format!("{} / {}", p.a, p.b), format!("{}/{}", p.consistent, p.total), format!("{:.2}", p.score)])
            .collect();
        rows.push(vec!["all pairs".into(), String::new(), format!("{:.2}", self.score)]);
        render_table(&["pair", "consistent", "DAS"], &rows)
    }
}

impl RobustnessReport {
    pub fn to_table(&self) -> String {
        let mut rows = vec![vec!["clean".to_string(), format!("{:.2}", self.clean_das), format!("{:.5}", 0.0)]];
        rows.extend(self.rows.iter().map(|r| {
            vec![r.perturbation.label(), format!("{:.2}", r.das), format!("{:.5}", r.displacement)]
        }));
        render_table(&["perturbation", "DAS", "displacement"], &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_align() {
        let t = render_table(&["a", "bb"], &[vec!["long name".into(), "1".into()], vec!["x".into(), "100".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a           bb");
        assert_eq!(lines[2], "long name    1");
        assert_eq!(lines[3], "x          100");
    }
}
