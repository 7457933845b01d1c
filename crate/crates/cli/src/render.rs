//! Text rendering of statement results.

/// A rule line, a header, a rule line, the rows, and a closing rule line.
/// Each column is as wide as its widest cell; cells are left-aligned.
pub fn render_table(columns: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let rule = {
        let mut s = String::from("|");
        for w in &widths {
            s.push_str(&"-".repeat((*w).max(1)));
            s.push('|');
        }
        s
    };
    let line = |cells: &[String]| {
        let mut s = String::from("|");
        for (w, cell) in widths.iter().zip(cells) {
            s.push_str(cell);
            s.push_str(&" ".repeat(w.saturating_sub(cell.chars().count())));
            s.push('|');
        }
        s
    };
    let mut out = vec![rule.clone(), line(columns), rule.clone()];
    out.extend(rows.iter().map(|r| line(r)));
    if !rows.is_empty() {
        out.push(rule);
    }
    out.join("\n") + "\n"
}

pub fn render_affected(n: usize) -> String {
    format!("{n} records affected\n")
}
