//! Deterministic synthetic citizens for simulation and load tests.
//!
//! Text values are drawn from the Bengali consonant block so they never
//! collide with ASCII column names or JSON punctuation.

use chrono::NaiveDate;
use rand::Rng;

use crate::nid::NationalId;
use crate::registry::{Blob, CitizenRecord, Gender};

const BENGALI_START: u32 = 0x0995;
const BENGALI_END: u32 = 0x09B9;

pub fn bengali_word(rng: &mut impl Rng, min_len: usize, max_len: usize) -> String {
    let len = rng.random_range(min_len..=max_len);
    (0..len)
        .map(|_| char::from_u32(rng.random_range(BENGALI_START..=BENGALI_END)).unwrap_or('ক'))
        .collect()
}

/// Id number `n` spread over districts; unique for every `n < 10^8`.
pub fn nid_for(n: u64) -> NationalId {
    NationalId {
        district: (n % 64) as u8 + 1,
        rmo: ((n / 64) % 10) as u8,
        thana: 0,
        union_code: ((n / 1_000_000) % 100) as u8,
        serial: (n % 1_000_000) as u32,
    }
}

fn date(rng: &mut impl Rng, from_year: i32, to_year: i32) -> NaiveDate {
    let y = rng.random_range(from_year..=to_year);
    let m = rng.random_range(1..=12);
    let d = rng.random_range(1..=28);
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

fn optional(rng: &mut impl Rng, min_len: usize, max_len: usize) -> String {
    if rng.random_bool(0.66) {
        bengali_word(rng, min_len, max_len)
    } else {
        String::new()
    }
}

fn optional_blob(rng: &mut impl Rng) -> Blob {
    if rng.random_bool(0.5) {
        blob(rng, 16)
    } else {
        Blob::default()
    }
}

pub fn blob(rng: &mut impl Rng, len: usize) -> Blob {
    // bytes >= 0x80 never appear inside ASCII JSON output
    Blob((0..len).map(|_| rng.random_range(0x80u8..=0xFF)).collect())
}

/// A plausible, fully random record for `nid`. About a third of the
/// optional columns are left empty.
pub fn synthetic_citizen(rng: &mut impl Rng, nid: NationalId) -> CitizenRecord {
    CitizenRecord {
        did: 0,
        national_id: nid,
        pin_id: optional(rng, 4, 8),
        voter_id: optional(rng, 4, 8),
        name: bengali_word(rng, 3, 10),
        english_name: bengali_word(rng, 3, 10),
        father_name: bengali_word(rng, 3, 10),
        mother_name: bengali_word(rng, 3, 10),
        spouse_name: optional(rng, 3, 10),
        gender: Some([Gender::Male, Gender::Female, Gender::Third][rng.random_range(0..3)]),
        marital_status: optional(rng, 2, 6),
        picture: optional_blob(rng),
        qualification: optional(rng, 2, 8),
        special: optional(rng, 2, 8),
        date_of_birth: Some(date(rng, 1930, 2005)),
        birth_district: bengali_word(rng, 3, 8),
        present_address: bengali_word(rng, 8, 20),
        permanent_address: bengali_word(rng, 8, 20),
        voter_area: optional(rng, 3, 8),
        occupation: optional(rng, 3, 8),
        specification_sign: optional(rng, 2, 8),
        b_group: optional(rng, 2, 3),
        tin: optional(rng, 4, 10),
        license: optional(rng, 4, 10),
        passport: optional(rng, 4, 10),
        iris_dna: optional_blob(rng),
        phone: optional(rng, 5, 11),
        nationality: bengali_word(rng, 4, 8),
        f_print: optional_blob(rng),
        death_date: None,
    }
}
