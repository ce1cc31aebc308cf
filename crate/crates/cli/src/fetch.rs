//! Download and normalise the Boston housing and Titanic tables into the
//! layouts described by `data/*.schema.toml`.

use std::fmt::Write as _;

use ifa_core::{Error, Result};

pub const BOSTON_URL: &str =
    "https://raw.githubusercontent.com/scikit-learn/scikit-learn/1.1.3/sklearn/datasets/data/boston_house_prices.csv";
pub const TITANIC_URL: &str = "https://raw.githubusercontent.com/datasciencedojo/datasets/master/titanic.csv";

const BOSTON_COLUMNS: [&str; 14] = [
    "CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS", "RAD", "TAX", "PTRATIO", "B", "LSTAT", "MEDV",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Name {
    Boston,
    Titanic,
}

impl std::str::FromStr for Name {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boston" => Ok(Name::Boston),
            "titanic" => Ok(Name::Titanic),
            _ => Err(Error::InvalidArgument(format!("unknown dataset `{s}` (expected boston or titanic)"))),
        }
    }
}

impl Name {
    pub fn default_url(self) -> &'static str {
        match self {
            Name::Boston => BOSTON_URL,
            Name::Titanic => TITANIC_URL,
        }
    }

    pub fn normalize(self, sources: &[String]) -> Result<(String, usize)> {
        match self {
            Name::Boston => {
                let [one] = sources else {
                    return Err(Error::InvalidArgument("boston takes exactly one source".into()));
                };
                normalize_boston(one)
            }
            Name::Titanic => normalize_titanic(sources),
        }
    }
}

/// Reads a local file, or downloads an `http(s)` URL.
pub fn read_source(source: &str) -> Result<String> {
    if source.starts_with("http://") || source.starts_with("https://") {
        let mut response = ureq::get(source)
            .call()
            .map_err(|e| Error::Io(std::io::Error::other(format!("{source}: {e}"))))?;
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Io(std::io::Error::other(format!("{source}: {e}"))))
    } else {
        let path = std::path::Path::new(source);
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(std::fs::read_to_string(path)?)
    }
}

/// Accepts the scikit-learn copy (a count line before the header) or a
/// plain CSV with the 14 named columns.
pub fn normalize_boston(text: &str) -> Result<(String, usize)> {
    let start = text
        .lines()
        .position(|l| l.contains("CRIM"))
        .ok_or_else(|| Error::MissingColumn("CRIM".into()))?;
    let body: String = text.lines().skip(start).collect::<Vec<_>>().join("\n");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let idx = BOSTON_COLUMNS
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| Error::MissingColumn(c.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = BOSTON_COLUMNS.join(",");
    let mut rows: usize = 0;
    out.push('\n');
    for record in reader.records() {
        let record = record?;
        let cells: Vec<&str> = idx.iter().map(|&i| record.get(i).unwrap_or("").trim()).collect();
        for (c, v) in BOSTON_COLUMNS.iter().zip(&cells) {
            if v.parse::<f64>().is_err() {
                return Err(Error::NonNumeric {
                    column: c.to_string(),
                    line: rows as u64 + 2,
                    value: v.to_string(),
                });
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
        rows += 1;
    }
    Ok((out, rows))
}

fn titanic_rows(text: &str, out: &mut String) -> Result<usize> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    enum Sex {
        Word(usize),
        Female(usize),
    }
    let (class, sex, age, sibsp, survived) = if find("Pclass").is_some() {
        (need("Pclass")?, Sex::Word(need("Sex")?), need("Age")?, need("SibSp")?, need("Survived")?)
    } else {
        (
            need("PassengerClass")?,
            Sex::Female(need("Sex_female")?),
            need("Age")?,
            need("No_of_siblings_plus_spouses_on_board")?,
            need("Survival")?,
        )
    };
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let sex = match sex {
            Sex::Word(i) => match cell(i) {
                "female" => "1",
                "male" => "0",
                other => {
                    return Err(Error::NonNumeric {
                        column: "Sex".into(),
                        line,
                        value: other.into(),
                    })
                }
            },
            Sex::Female(i) => {
                if cell(i) == "1" {
                    "1"
                } else {
                    "0"
                }
            }
        };
        // negative ages are missing-value markers in some copies
        let age = match cell(age).parse::<f64>() {
            Ok(a) if a >= 0.0 => cell(age),
            _ => "",
        };
        writeln!(out, "{},{sex},{age},{},{}", cell(class), cell(sibsp), cell(survived)).expect("writing to a String");
        rows += 1;
    }
    Ok(rows)
}

/// Accepts the Kaggle layout (`Pclass, Sex, Age, SibSp, Survived`) or a
/// one-hot copy (`PassengerClass, Sex_female, Age, ..., Survival`). Several
/// sources (e.g. train and test parts) are concatenated. Missing ages are
/// left empty so loading drops and counts those rows.
pub fn normalize_titanic(sources: &[String]) -> Result<(String, usize)> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("no titanic sources".into()));
    }
    let mut out = String::from("class,sex,age,sibsp,survived\n");
    let mut rows = 0;
    for text in sources {
        rows += titanic_rows(text, &mut out)?;
    }
    Ok((out, rows))
}
