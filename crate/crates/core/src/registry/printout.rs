//! Fixed-layout text printout of a citizen record.

use super::schema::CitizenRecord;

pub const PRINTOUT_HEADER: &str = "NATIONAL ID DATABASE - OFFICIAL RECORD";

/// Header line, then `Column: value` for every non-empty column in schema
/// order. `DID` is an internal surrogate and is left out. Binary columns
/// print their size; line breaks inside values become spaces.
pub fn render_official_printout(record: &CitizenRecord) -> String {
    let mut out = String::new();
    out.push_str(PRINTOUT_HEADER);
    out.push('\n');
    for column in CitizenRecord::COLUMNS.iter().filter(|c| **c != "DID") {
        if record.field_is_blank(column) == Some(true) {
            continue;
        }
        let value = match record.blob(column) {
            Some(blob) => format!("[binary, {} bytes]", blob.len()),
            None => record
                .field_text(column)
                .map(|t| t.trim().replace(['\r', '\n'], " "))
                .unwrap_or_default(),
        };
        out.push_str(column);
        out.push_str(": ");
        out.push_str(&value);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nid::parse_nid;
    use crate::registry::Blob;
    use chrono::NaiveDate;

    fn minimal() -> CitizenRecord {
        let mut r = CitizenRecord::new(parse_nid("2615481234567").unwrap());
        r.name = "রহিম".into();
        r
    }

    #[test]
    fn nid_and_name_only_is_three_lines() {
        let text = render_official_printout(&minimal());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec![PRINTOUT_HEADER, "National_ID: 2615481234567", "Name: রহিম"]);
    }

    #[test]
    fn identical_records_render_identical_bytes() {
        let mut a = minimal();
        a.did = 7;
        a.phone = "01700000000".into();
        a.picture = Blob(vec![1; 40]);
        let b = a.clone();
        assert_eq!(render_official_printout(&a).into_bytes(), render_official_printout(&b).into_bytes());
        assert!(render_official_printout(&a).contains("Picture: [binary, 40 bytes]\n"));
        assert!(!render_official_printout(&a).contains("DID"));
    }

    #[test]
    fn death_date_line_when_present() {
        let mut r = minimal();
        r.death_date = NaiveDate::from_ymd_opt(2024, 5, 1);
        let text = render_official_printout(&r);
        assert!(text.ends_with("Death_date: 2024-05-01\n"));
    }

    #[test]
    fn follows_schema_order() {
        let mut r = minimal();
        r.phone = "1".into();
        r.english_name = "Rahim".into();
        r.tin = "9".into();
        let text = render_official_printout(&r);
        let cols: Vec<&str> = text.lines().skip(1).map(|l| l.split(':').next().unwrap()).collect();
        assert_eq!(cols, vec!["National_ID", "Name", "English_name", "TIN", "Phone"]);
    }

    #[test]
    fn embedded_newlines_do_not_break_layout() {
        let mut r = minimal();
        r.present_address = "House 1\nRoad 2".into();
        assert!(render_official_printout(&r).contains("Present_address: House 1 Road 2\n"));
    }
}
