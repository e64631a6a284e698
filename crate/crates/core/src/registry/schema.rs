//! The five record tables and their column names.
//!
//! Column names are the external names used by JSONL/CSV ingestion and by
//! verification claims. `CitizenRecord` carries `National_ID` right after
//! `DID`; it is the join key for every linked table.

use std::borrow::Cow;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::nid::{parse_nid, NationalId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{column}: {reason}")]
pub struct FieldError {
    pub column: String,
    pub reason: String,
}

/// Text form and comparison rules for one column type.
pub trait FieldCodec: Sized {
    fn to_text(&self) -> Cow<'_, str>;
    fn from_text(text: &str) -> Result<Self, String>;
    fn is_blank(&self) -> bool {
        self.to_text().trim().is_empty()
    }
    /// Claims and stored values are compared after trimming surrounding
    /// whitespace, byte for byte.
    fn matches_claim(&self, claim: &str) -> bool {
        self.to_text().trim() == claim.trim()
    }
}

impl FieldCodec for String {
    fn to_text(&self) -> Cow<'_, str> {
        Cow::Borrowed(self)
    }
    fn from_text(text: &str) -> Result<Self, String> {
        Ok(text.to_string())
    }
}

impl FieldCodec for u64 {
    fn to_text(&self) -> Cow<'_, str> {
        if *self == 0 {
            Cow::Borrowed("")
        } else {
            Cow::Owned(self.to_string())
        }
    }
    fn from_text(text: &str) -> Result<Self, String> {
        let t = text.trim();
        if t.is_empty() {
            return Ok(0);
        }
        t.parse().map_err(|_| format!("not an unsigned integer: {t:?}"))
    }
}

impl FieldCodec for NationalId {
    fn to_text(&self) -> Cow<'_, str> {
        Cow::Owned(self.canonical())
    }
    fn from_text(text: &str) -> Result<Self, String> {
        parse_nid(text.trim()).map_err(|e| e.to_string())
    }
}

impl FieldCodec for Option<NaiveDate> {
    fn to_text(&self) -> Cow<'_, str> {
        match self {
            Some(d) => Cow::Owned(d.format("%Y-%m-%d").to_string()),
            None => Cow::Borrowed(""),
        }
    }
    fn from_text(text: &str) -> Result<Self, String> {
        let t = text.trim();
        if t.is_empty() {
            return Ok(None);
        }
        NaiveDate::parse_from_str(t, "%Y-%m-%d")
            .map(Some)
            .map_err(|_| format!("expected YYYY-MM-DD, got {t:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    Third,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
            Gender::Third => "Third",
        }
    }
}

impl FieldCodec for Option<Gender> {
    fn to_text(&self) -> Cow<'_, str> {
        Cow::Borrowed(self.map_or("", Gender::as_str))
    }
    fn from_text(text: &str) -> Result<Self, String> {
        match text.trim() {
            "" => Ok(None),
            "Male" => Ok(Some(Gender::Male)),
            "Female" => Ok(Some(Gender::Female)),
            "Third" => Ok(Some(Gender::Third)),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

/// Opaque binary column (picture, fingerprint, iris). Base64 in text form;
/// compared by exact byte equality only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Blob(pub Vec<u8>);

impl Blob {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FieldCodec for Blob {
    fn to_text(&self) -> Cow<'_, str> {
        Cow::Owned(B64.encode(&self.0))
    }
    fn from_text(text: &str) -> Result<Self, String> {
        B64.decode(text.trim()).map(Blob).map_err(|e| format!("bad base64: {e}"))
    }
    fn is_blank(&self) -> bool {
        self.0.is_empty()
    }
    fn matches_claim(&self, claim: &str) -> bool {
        B64.decode(claim.trim()).is_ok_and(|bytes| bytes == self.0)
    }
}

impl Serialize for Blob {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&B64.encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Blob {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Blob::from_text(&text).map_err(serde::de::Error::custom)
    }
}

macro_rules! columns {
    ($ty:ident { $($field:ident => $col:literal),+ $(,)? }) => {
        impl $ty {
            pub const COLUMNS: &'static [&'static str] = &[$($col),+];

            pub fn has_column(column: &str) -> bool {
                Self::COLUMNS.contains(&column)
            }

            /// Text form of a column, `None` for unknown names.
            pub fn field_text(&self, column: &str) -> Option<Cow<'_, str>> {
                match column {
                    $($col => Some(FieldCodec::to_text(&self.$field)),)+
                    _ => None,
                }
            }

            pub fn field_is_blank(&self, column: &str) -> Option<bool> {
                match column {
                    $($col => Some(FieldCodec::is_blank(&self.$field)),)+
                    _ => None,
                }
            }

            pub fn claim_matches(&self, column: &str, claim: &str) -> Option<bool> {
                match column {
                    $($col => Some(FieldCodec::matches_claim(&self.$field, claim)),)+
                    _ => None,
                }
            }

            pub fn set_field(&mut self, column: &str, text: &str) -> Result<(), FieldError> {
                let err = |reason: String| FieldError { column: column.to_string(), reason };
                match column {
                    $($col => self.$field = FieldCodec::from_text(text).map_err(err)?,)+
                    _ => return Err(err("unknown field".into())),
                }
                Ok(())
            }
        }
    };
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitizenRecord {
    #[serde(rename = "DID", default)]
    pub did: u64,
    #[serde(rename = "National_ID")]
    pub national_id: NationalId,
    #[serde(rename = "PIN_ID", default)]
    pub pin_id: String,
    #[serde(rename = "Voter_ID", default)]
    pub voter_id: String,
    #[serde(rename = "Name", default)]
    pub name: String,
    #[serde(rename = "English_name", default)]
    pub english_name: String,
    #[serde(rename = "Father_name", default)]
    pub father_name: String,
    #[serde(rename = "Mother_name", default)]
    pub mother_name: String,
    #[serde(rename = "Spouse_name", default)]
    pub spouse_name: String,
    #[serde(rename = "Gender", default)]
    pub gender: Option<Gender>,
    #[serde(rename = "Merital_status", default)]
    pub marital_status: String,
    #[serde(rename = "Picture", default)]
    pub picture: Blob,
    #[serde(rename = "Qualification", default)]
    pub qualification: String,
    #[serde(rename = "Special", default)]
    pub special: String,
    #[serde(rename = "Date_of_birth", default)]
    pub date_of_birth: Option<NaiveDate>,
    #[serde(rename = "Birth_district", default)]
    pub birth_district: String,
    #[serde(rename = "Present_address", default)]
    pub present_address: String,
    #[serde(rename = "Permanent_address", default)]
    pub permanent_address: String,
    #[serde(rename = "Voter_area", default)]
    pub voter_area: String,
    #[serde(rename = "Occupation", default)]
    pub occupation: String,
    #[serde(rename = "Specification_sign", default)]
    pub specification_sign: String,
    #[serde(rename = "B_group", default)]
    pub b_group: String,
    #[serde(rename = "TIN", default)]
    pub tin: String,
    #[serde(rename = "License", default)]
    pub license: String,
    #[serde(rename = "Passport", default)]
    pub passport: String,
    #[serde(rename = "IRIS_DNA", default)]
    pub iris_dna: Blob,
    #[serde(rename = "Phone", default)]
    pub phone: String,
    #[serde(rename = "Nationality", default)]
    pub nationality: String,
    #[serde(rename = "F_print", default)]
    pub f_print: Blob,
    #[serde(rename = "Death_date", default)]
    pub death_date: Option<NaiveDate>,
}

columns!(CitizenRecord {
    did => "DID",
    national_id => "National_ID",
    pin_id => "PIN_ID",
    voter_id => "Voter_ID",
    name => "Name",
    english_name => "English_name",
    father_name => "Father_name",
    mother_name => "Mother_name",
    spouse_name => "Spouse_name",
    gender => "Gender",
    marital_status => "Merital_status",
    picture => "Picture",
    qualification => "Qualification",
    special => "Special",
    date_of_birth => "Date_of_birth",
    birth_district => "Birth_district",
    present_address => "Present_address",
    permanent_address => "Permanent_address",
    voter_area => "Voter_area",
    occupation => "Occupation",
    specification_sign => "Specification_sign",
    b_group => "B_group",
    tin => "TIN",
    license => "License",
    passport => "Passport",
    iris_dna => "IRIS_DNA",
    phone => "Phone",
    nationality => "Nationality",
    f_print => "F_print",
    death_date => "Death_date",
});

impl CitizenRecord {
    pub fn new(national_id: NationalId) -> Self {
        CitizenRecord { national_id, ..Default::default() }
    }

    /// Binary columns, which render as a byte count rather than text.
    pub fn is_binary_column(column: &str) -> bool {
        matches!(column, "Picture" | "IRIS_DNA" | "F_print")
    }

    pub fn blob(&self, column: &str) -> Option<&Blob> {
        match column {
            "Picture" => Some(&self.picture),
            "IRIS_DNA" => Some(&self.iris_dna),
            "F_print" => Some(&self.f_print),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriminalRecord {
    #[serde(rename = "Record_ID", default)]
    pub record_id: u64,
    #[serde(rename = "National_ID")]
    pub national_id: NationalId,
    #[serde(rename = "Record_no", default)]
    pub record_no: String,
    #[serde(rename = "Case_no", default)]
    pub case_no: String,
    #[serde(rename = "Type", default)]
    pub kind: String,
    #[serde(rename = "Place", default)]
    pub place: String,
    #[serde(rename = "Police_station", default)]
    pub police_station: String,
    #[serde(rename = "Date", default)]
    pub date: Option<NaiveDate>,
    #[serde(rename = "Status", default)]
    pub status: String,
    #[serde(rename = "Details", default)]
    pub details: String,
}

columns!(CriminalRecord {
    record_id => "Record_ID",
    national_id => "National_ID",
    record_no => "Record_no",
    case_no => "Case_no",
    kind => "Type",
    place => "Place",
    police_station => "Police_station",
    date => "Date",
    status => "Status",
    details => "Details",
});

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankAccLoan {
    #[serde(rename = "Bank_ID", default)]
    pub bank_id: u64,
    #[serde(rename = "National_ID")]
    pub national_id: NationalId,
    #[serde(rename = "Account_name", default)]
    pub account_name: String,
    #[serde(rename = "Bank_name", default)]
    pub bank_name: String,
    #[serde(rename = "Branch_name", default)]
    pub branch_name: String,
    #[serde(rename = "Account_no", default)]
    pub account_no: String,
    #[serde(rename = "Card_no", default)]
    pub card_no: String,
    #[serde(rename = "Account_type", default)]
    pub account_type: String,
    #[serde(rename = "Date", default)]
    pub date: Option<NaiveDate>,
    #[serde(rename = "Remarks", default)]
    pub remarks: String,
}

columns!(BankAccLoan {
    bank_id => "Bank_ID",
    national_id => "National_ID",
    account_name => "Account_name",
    bank_name => "Bank_name",
    branch_name => "Branch_name",
    account_no => "Account_no",
    card_no => "Card_no",
    account_type => "Account_type",
    date => "Date",
    remarks => "Remarks",
});

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EducationRecord {
    #[serde(rename = "Education_ID", default)]
    pub education_id: u64,
    #[serde(rename = "National_ID")]
    pub national_id: NationalId,
    #[serde(rename = "Degree_name", default)]
    pub degree_name: String,
    #[serde(rename = "Year", default)]
    pub year: String,
    #[serde(rename = "Registration_no", default)]
    pub registration_no: String,
    #[serde(rename = "Roll_no", default)]
    pub roll_no: String,
    #[serde(rename = "Result", default)]
    pub result: String,
    #[serde(rename = "Marks", default)]
    pub marks: String,
    #[serde(rename = "Remarks", default)]
    pub remarks: String,
}

columns!(EducationRecord {
    education_id => "Education_ID",
    national_id => "National_ID",
    degree_name => "Degree_name",
    year => "Year",
    registration_no => "Registration_no",
    roll_no => "Roll_no",
    result => "Result",
    marks => "Marks",
    remarks => "Remarks",
});

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRecord {
    #[serde(rename = "Job_ID", default)]
    pub job_id: u64,
    #[serde(rename = "National_ID")]
    pub national_id: NationalId,
    #[serde(rename = "Job_title", default)]
    pub job_title: String,
    #[serde(rename = "Institute", default)]
    pub institute: String,
    #[serde(rename = "Address", default)]
    pub address: String,
    #[serde(rename = "Designation", default)]
    pub designation: String,
    #[serde(rename = "Joining_date", default)]
    pub joining_date: Option<NaiveDate>,
    #[serde(rename = "Departure_date", default)]
    pub departure_date: Option<NaiveDate>,
    #[serde(rename = "Remarks", default)]
    pub remarks: String,
}

columns!(JobRecord {
    job_id => "Job_ID",
    national_id => "National_ID",
    job_title => "Job_title",
    institute => "Institute",
    address => "Address",
    designation => "Designation",
    joining_date => "Joining_date",
    departure_date => "Departure_date",
    remarks => "Remarks",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkedTable {
    Criminal,
    Bank,
    Education,
    Job,
}

impl LinkedTable {
    pub const ALL: [LinkedTable; 4] =
        [LinkedTable::Criminal, LinkedTable::Bank, LinkedTable::Education, LinkedTable::Job];

    /// Table name as listed in the schema.
    pub fn table_name(self) -> &'static str {
        match self {
            LinkedTable::Criminal => "criminal_record",
            LinkedTable::Bank => "bank_acc_loan",
            LinkedTable::Education => "Education",
            LinkedTable::Job => "job_record",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        LinkedTable::ALL
            .into_iter()
            .find(|t| t.table_name().eq_ignore_ascii_case(name) || t.short_name() == name)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            LinkedTable::Criminal => "criminal",
            LinkedTable::Bank => "bank",
            LinkedTable::Education => "education",
            LinkedTable::Job => "job",
        }
    }
}

/// A row of one of the four linked tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "table", content = "row", rename_all = "snake_case")]
pub enum LinkedRecord {
    Criminal(CriminalRecord),
    Bank(BankAccLoan),
    Education(EducationRecord),
    Job(JobRecord),
}

impl LinkedRecord {
    pub fn table(&self) -> LinkedTable {
        match self {
            LinkedRecord::Criminal(_) => LinkedTable::Criminal,
            LinkedRecord::Bank(_) => LinkedTable::Bank,
            LinkedRecord::Education(_) => LinkedTable::Education,
            LinkedRecord::Job(_) => LinkedTable::Job,
        }
    }

    pub fn national_id(&self) -> NationalId {
        match self {
            LinkedRecord::Criminal(r) => r.national_id,
            LinkedRecord::Bank(r) => r.national_id,
            LinkedRecord::Education(r) => r.national_id,
            LinkedRecord::Job(r) => r.national_id,
        }
    }

    pub fn id(&self) -> u64 {
        match self {
            LinkedRecord::Criminal(r) => r.record_id,
            LinkedRecord::Bank(r) => r.bank_id,
            LinkedRecord::Education(r) => r.education_id,
            LinkedRecord::Job(r) => r.job_id,
        }
    }

    pub fn set_id(&mut self, id: u64) {
        match self {
            LinkedRecord::Criminal(r) => r.record_id = id,
            LinkedRecord::Bank(r) => r.bank_id = id,
            LinkedRecord::Education(r) => r.education_id = id,
            LinkedRecord::Job(r) => r.job_id = id,
        }
    }

    /// Row-level invariants beyond the join key.
    pub fn check(&self) -> Result<(), String> {
        if let LinkedRecord::Job(j) = self {
            if let (Some(join), Some(dep)) = (j.joining_date, j.departure_date) {
                if dep < join {
                    return Err(format!("Departure_date {dep} precedes Joining_date {join}"));
                }
            }
        }
        Ok(())
    }

    /// Builds an empty row of `table` for `nid`.
    pub fn empty(table: LinkedTable, national_id: NationalId) -> Self {
        match table {
            LinkedTable::Criminal => LinkedRecord::Criminal(CriminalRecord { national_id, ..Default::default() }),
            LinkedTable::Bank => LinkedRecord::Bank(BankAccLoan { national_id, ..Default::default() }),
            LinkedTable::Education => {
                LinkedRecord::Education(EducationRecord { national_id, ..Default::default() })
            }
            LinkedTable::Job => LinkedRecord::Job(JobRecord { national_id, ..Default::default() }),
        }
    }

    pub fn set_field(&mut self, column: &str, text: &str) -> Result<(), FieldError> {
        match self {
            LinkedRecord::Criminal(r) => r.set_field(column, text),
            LinkedRecord::Bank(r) => r.set_field(column, text),
            LinkedRecord::Education(r) => r.set_field(column, text),
            LinkedRecord::Job(r) => r.set_field(column, text),
        }
    }
}
