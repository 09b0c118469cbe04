use std::io::{self, Write};

/// One row of an attention-weight dump, 1-based indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRow {
    pub output_step: usize,
    pub frame: usize,
    pub weight: f64,
}

/// Writes `output_step,frame,weight` CSV. Lines of `header` are emitted
/// first as `#` comments.
pub fn write_weight_csv<W: Write>(out: &mut W, header: &[String], rows: &[WeightRow]) -> io::Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "output_step,frame,weight")?;
    for r in rows {
        writeln!(out, "{},{},{:e}", r.output_step, r.frame, r.weight)?;
    }
    Ok(())
}
