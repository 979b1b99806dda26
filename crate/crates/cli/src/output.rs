use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Column-oriented CSV table with a header row, `.` decimals and `\n` line
/// endings.
pub struct Csv {
    header: Vec<String>,
    body: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), body: String::new() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.header.len());
        for (k, cell) in cells.iter().enumerate() {
            if k > 0 {
                self.body.push(',');
            }
            match cell {
                Cell::F(v) => write!(self.body, "{v}").unwrap(),
                Cell::U(v) => write!(self.body, "{v}").unwrap(),
                Cell::S(v) => self.body.push_str(v),
                Cell::Empty => {}
            }
        }
        self.body.push('\n');
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        out.push_str(&self.body);
        out
    }
}

pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::F)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<Option<usize>> for Cell {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Cell::Empty, |n| Cell::U(n as u64))
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(if v { "true".into() } else { "false".into() })
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.into())
    }
}

pub fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialise");
    s.push('\n');
    s
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Destination for the files of one subcommand run.
pub struct Sink {
    dir: Option<PathBuf>,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, written: Vec::new() }
    }

    pub fn put(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        if let Some(dir) = &self.dir {
            let path = dir.join(name);
            write_atomic(&path, contents)?;
            self.written.push(path);
        }
        Ok(())
    }
}
