//! Minimal aligned-text table rendering for the human-readable reports.

/// Renders rows as aligned columns: the first column left-aligned, the rest
/// right-aligned. The first row is treated as the header and underlined.
pub fn render(rows: &[Vec<String>]) -> String {
    if rows.is_empty() {
        return String::new();
    }
    let columns = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for (index, row) in rows.iter().enumerate() {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i == 0 {
                line.push_str(&format!("{cell:<width$}", width = widths[i]));
            } else {
                line.push_str(&format!("{cell:>width$}", width = widths[i]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if index == 0 {
            let underline_width = line.trim_end().len();
            out.push_str(&"-".repeat(underline_width));
            out.push('\n');
        }
    }
    out
}

/// Formats a float with a fixed number of decimals for report display.
pub fn fixed(value: f64, decimals: usize) -> String {
    format!("{value:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_line_up() {
        let rows = vec![
            vec!["name".to_string(), "n".to_string()],
            vec!["alpha".to_string(), "5".to_string()],
            vec!["b".to_string(), "1234".to_string()],
        ];
        let text = render(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("alpha"));
        assert!(lines[3].ends_with("1234"));
    }
}
