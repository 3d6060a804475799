//! Row-major numeric table used for instruments, covariates and directions.

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    width: usize,
    rows: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn new(width: usize) -> Self {
        Self { width, rows: 0, data: Vec::new() }
    }

    pub fn with_capacity(width: usize, rows: usize) -> Self {
        Self { width, rows: 0, data: Vec::with_capacity(width * rows) }
    }

    /// Builds a table from row slices; panics if widths disagree.
    pub fn from_rows<R: AsRef<[f64]>>(width: usize, rows: &[R]) -> Self {
        let mut t = Self::with_capacity(width, rows.len());
        for r in rows {
            t.push_row(r.as_ref());
        }
        t
    }

    /// Single-column table.
    pub fn from_column(values: &[f64]) -> Self {
        Self { width: 1, rows: values.len(), data: values.to_vec() }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.width, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.width + j]).collect()
    }

    /// Rows selected by `keep`, in order.
    pub fn select(&self, keep: &[usize]) -> Self {
        let mut t = Self::with_capacity(self.width, keep.len());
        for &i in keep {
            t.push_row(self.row(i));
        }
        t
    }
}
