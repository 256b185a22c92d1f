use std::fmt;

/// Mean visible count with mean total similarity in parentheses, one column
/// per tour kind and one row per dataset.
#[derive(Debug, Clone, Default)]
pub struct OccupancyTable {
    columns: Vec<String>,
    rows: Vec<(String, Vec<(f64, f64)>)>,
}

impl OccupancyTable {
    pub fn new(columns: Vec<String>) -> Self {
        OccupancyTable { columns, rows: Vec::new() }
    }

    pub fn push_row(&mut self, label: impl Into<String>, cells: Vec<(f64, f64)>) {
        assert_eq!(cells.len(), self.columns.len(), "one cell per column");
        self.rows.push((label.into(), cells));
    }

    pub fn cell(&self, row: usize, col: usize) -> (f64, f64) {
        self.rows[row].1[col]
    }
}

impl fmt::Display for OccupancyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(_, cs)| cs.iter().map(|(v, t)| format!("{v:.1} ({t:.1})")).collect())
            .collect();
        let label_w = self.rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| cells.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap_or(0))
            .collect();
        write!(f, "{:label_w$}", "")?;
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(f, "  {c:>w$}")?;
        }
        writeln!(f)?;
        for ((label, _), row) in self.rows.iter().zip(&cells) {
            write!(f, "{label:label_w$}")?;
            for (c, w) in row.iter().zip(&widths) {
                write!(f, "  {c:>w$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
