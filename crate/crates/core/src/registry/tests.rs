use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::gateway::auth::CredentialStore;
use crate::synth::{nid_for, synthetic_citizen};

fn nid(s: &str) -> NationalId {
    parse_nid(s).unwrap()
}

fn citizen(s: &str, english: &str) -> CitizenRecord {
    let mut r = CitizenRecord::new(nid(s));
    r.english_name = english.into();
    r
}

fn claims(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn authority() -> Principal {
    Principal::DataEntryAuthority("clerk".into())
}

fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

#[test]
fn first_insert_gets_did_one() {
    let mut reg = Registry::in_memory();
    assert_eq!(reg.insert_citizen(citizen("2615481234567", "A")).unwrap(), 1);
    assert_eq!(reg.insert_citizen(citizen("2615481234568", "B")).unwrap(), 2);
    assert_eq!(reg.view().citizen(&nid("2615481234568")).unwrap().unwrap().did, 2);
}

#[test]
fn duplicate_insert_is_rejected() {
    let mut reg = Registry::in_memory();
    reg.insert_citizen(citizen("2615481234567", "A")).unwrap();
    assert!(matches!(
        reg.insert_citizen(citizen("2615481234567", "A")),
        Err(RegistryError::DuplicateId(_))
    ));
    assert_eq!(reg.last_seq(), 1);
}

#[test]
fn invalid_nid_in_record() {
    // A record can only carry an out-of-range id if built by hand.
    let mut reg = Registry::in_memory();
    let mut r = CitizenRecord::default();
    r.national_id.district = 100;
    assert!(matches!(reg.insert_citizen(r), Err(RegistryError::InvalidNid(_))));
    assert!(matches!(
        reg.verify_fields("12", &claims(&[("Name", "x")])),
        Err(RegistryError::InvalidNid(NidError::Length { found: 2 }))
    ));
}

#[test]
fn linked_rows_need_a_live_citizen() {
    let mut reg = Registry::in_memory();
    let id = nid("2615481234567");
    reg.insert_citizen(CitizenRecord::new(id)).unwrap();
    let mut edu = LinkedRecord::empty(LinkedTable::Education, id);
    edu.set_field("Degree_name", "SSC").unwrap();
    assert_eq!(reg.insert_linked(edu.clone()).unwrap(), 1);
    assert_eq!(reg.insert_linked(edu).unwrap(), 2);

    let orphan = LinkedRecord::empty(LinkedTable::Criminal, nid("0100203000045"));
    assert!(matches!(reg.insert_linked(orphan), Err(RegistryError::OrphanRecord(_))));

    reg.archive_deceased("2615481234567", date("2024-01-01")).unwrap();
    let job = LinkedRecord::empty(LinkedTable::Job, id);
    assert!(matches!(reg.insert_linked(job), Err(RegistryError::ArchivedTarget(_))));
}

#[test]
fn ids_are_per_table() {
    let mut reg = Registry::in_memory();
    let id = nid("2615481234567");
    reg.insert_citizen(CitizenRecord::new(id)).unwrap();
    assert_eq!(reg.insert_linked(LinkedRecord::empty(LinkedTable::Job, id)).unwrap(), 1);
    assert_eq!(reg.insert_linked(LinkedRecord::empty(LinkedTable::Bank, id)).unwrap(), 1);
    assert_eq!(reg.insert_linked(LinkedRecord::empty(LinkedTable::Job, id)).unwrap(), 2);
    assert_eq!(reg.view().linked(&id).unwrap().len(), 3);
}

#[test]
fn job_with_departure_before_joining_is_invalid() {
    let mut reg = Registry::in_memory();
    let id = nid("2615481234567");
    reg.insert_citizen(CitizenRecord::new(id)).unwrap();
    let mut job = LinkedRecord::empty(LinkedTable::Job, id);
    job.set_field("Joining_date", "2020-05-01").unwrap();
    job.set_field("Departure_date", "2020-04-01").unwrap();
    assert!(matches!(reg.insert_linked(job), Err(RegistryError::InvalidRecord(_))));
}

#[test]
fn verify_match_mismatch_unknown() {
    let mut reg = Registry::in_memory();
    reg.insert_citizen(citizen("2615481234567", "A")).unwrap();
    let r = reg.verify_fields("2615481234567", &claims(&[("English_name", "A")])).unwrap();
    assert_eq!(r.results["English_name"], FieldVerdict::Match);
    let r = reg.verify_fields("2615481234567", &claims(&[("English_name", "B")])).unwrap();
    assert_eq!(r.results["English_name"], FieldVerdict::Mismatch);
    let r = reg
        .verify_fields("2615481234567", &claims(&[("English_name", "A"), ("nickname", "X")]))
        .unwrap();
    assert_eq!(r.results.len(), 2);
    assert_eq!(r.results["English_name"], FieldVerdict::Match);
    assert_eq!(r.results["nickname"], FieldVerdict::UnknownField);
}

#[test]
fn verify_unknown_citizen() {
    let reg = Registry::in_memory();
    assert!(matches!(
        reg.verify_fields("2615481234567", &claims(&[("Name", "x")])),
        Err(RegistryError::NoSuchCitizen)
    ));
}

#[test]
fn verify_trims_and_keeps_case() {
    let mut reg = Registry::in_memory();
    reg.insert_citizen(citizen("2615481234567", "Rahim")).unwrap();
    let r = reg
        .verify_fields("2615481234567", &claims(&[("English_name", "  Rahim\t"), ("Father_name", "")]))
        .unwrap();
    assert_eq!(r.results["English_name"], FieldVerdict::Match);
    assert_eq!(r.results["Father_name"], FieldVerdict::Match);
    let r = reg.verify_fields("2615481234567", &claims(&[("English_name", "rahim")])).unwrap();
    assert_eq!(r.results["English_name"], FieldVerdict::Mismatch);
}

#[test]
fn owner_lookup_is_password_gated() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut reg = Registry::in_memory();
    let id = nid("2615481234567");
    let cred = Credential::new(Principal::Citizen(id), "secret", &mut rng);
    reg.insert_citizen_with(citizen("2615481234567", "A"), Some(cred)).unwrap();
    reg.insert_linked(LinkedRecord::empty(LinkedTable::Education, id)).unwrap();
    let none = CredentialStore::default();

    let full = reg.owner_lookup("2615481234567", "secret", &none).unwrap();
    assert_eq!(full.record.english_name, "A");
    assert_eq!(full.linked.len(), 1);

    let wrong = reg.owner_lookup("2615481234567", "guess", &none).unwrap_err();
    let unknown = reg.owner_lookup("0100203000045", "secret", &none).unwrap_err();
    let garbage = reg.owner_lookup("abc", "secret", &none).unwrap_err();
    for e in [wrong, unknown, garbage] {
        assert!(matches!(e, RegistryError::AuthFailure));
        assert_eq!(e.to_string(), "authentication failed");
    }
}

#[test]
fn update_creates_versions() {
    let mut reg = Registry::in_memory();
    let id = nid("2615481234567");
    reg.insert_citizen(citizen("2615481234567", "A")).unwrap();
    let v = reg
        .update_citizen("2615481234567", &claims(&[("Phone", "01711111111")]), &authority())
        .unwrap();
    assert_eq!(v, 2);
    let v = reg
        .update_citizen("2615481234567", &claims(&[("Phone", "01722222222")]), &Principal::Citizen(id))
        .unwrap();
    assert_eq!(v, 3);
    let history = reg.history(&id).unwrap();
    let versions: Vec<u64> = history.iter().map(|h| h.version).collect();
    assert_eq!(versions, vec![1, 2, 3]);
    assert_eq!(history[1].record.phone, "01711111111");
    assert_eq!(reg.view().citizen(&id).unwrap().unwrap().phone, "01722222222");
}

#[test]
fn update_authorization_and_fields() {
    let mut reg = Registry::in_memory();
    let id = nid("2615481234567");
    reg.insert_citizen(CitizenRecord::new(id)).unwrap();
    let me = Principal::Citizen(id);
    let other = Principal::Citizen(nid("0100203000045"));
    assert!(matches!(
        reg.update_citizen("2615481234567", &claims(&[("Name", "x")]), &me),
        Err(RegistryError::AuthFailure)
    ));
    assert!(matches!(
        reg.update_citizen("2615481234567", &claims(&[("Phone", "1")]), &other),
        Err(RegistryError::AuthFailure)
    ));
    assert!(matches!(
        reg.update_citizen("2615481234567", &claims(&[("Phone", "1")]), &Principal::Corporate("acme".into())),
        Err(RegistryError::AuthFailure)
    ));
    assert!(matches!(
        reg.update_citizen("2615481234567", &claims(&[("Nickname", "x")]), &authority()),
        Err(RegistryError::UnknownField(f)) if f == "Nickname"
    ));
    assert!(matches!(
        reg.update_citizen("0100203000045", &claims(&[("Phone", "1")]), &authority()),
        Err(RegistryError::NoSuchCitizen)
    ));
    assert!(matches!(
        reg.update_citizen("2615481234567", &claims(&[("National_ID", "0100203000045")]), &authority()),
        Err(RegistryError::InvalidValue(_))
    ));
    assert!(matches!(
        reg.update_citizen("2615481234567", &claims(&[("Date_of_birth", "yesterday")]), &authority()),
        Err(RegistryError::InvalidValue(_))
    ));
    assert_eq!(reg.last_seq(), 1);
}

#[test]
fn archive_moves_record_and_rows() {
    let mut reg = Registry::in_memory();
    let id = nid("2615481234567");
    reg.insert_citizen(citizen("2615481234567", "A")).unwrap();
    reg.insert_linked(LinkedRecord::empty(LinkedTable::Bank, id)).unwrap();
    reg.insert_linked(LinkedRecord::empty(LinkedTable::Job, id)).unwrap();
    let before = reg.archive_entries();

    let receipt = reg.archive_deceased("2615481234567", date("2023-12-31")).unwrap();
    assert_eq!(receipt.did, 1);
    assert_eq!(receipt.linked_rows, 2);
    assert_eq!(receipt.archive_entries, before + 1);
    assert_eq!(reg.archive_entries(), before + 1);

    assert!(matches!(
        reg.verify_fields("2615481234567", &claims(&[("English_name", "A")])),
        Err(RegistryError::NoSuchCitizen)
    ));
    assert!(reg.view().linked(&id).unwrap().is_empty());
    let archived = reg.view().archived(&id).unwrap();
    assert_eq!(archived.len(), 1);
    assert_eq!(archived[0].record.death_date, Some(date("2023-12-31")));
    assert_eq!(archived[0].linked.len(), 2);
    assert!(render_official_printout(&archived[0].record).contains("Death_date: 2023-12-31"));

    assert!(matches!(
        reg.archive_deceased("2615481234567", date("2023-12-31")),
        Err(RegistryError::AlreadyArchived(_))
    ));
    assert!(matches!(
        reg.archive_deceased("0100203000045", date("2023-12-31")),
        Err(RegistryError::NoSuchCitizen)
    ));
}

#[test]
fn archive_file_is_append_only_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    {
        let mut reg = Registry::open(dir.path()).unwrap();
        for i in 0..3 {
            reg.insert_citizen(CitizenRecord::new(nid_for(i))).unwrap();
        }
        reg.archive_deceased(&nid_for(0).canonical(), date("2020-01-01")).unwrap();
        reg.archive_deceased(&nid_for(2).canonical(), date("2020-01-02")).unwrap();
    }
    let text = std::fs::read_to_string(dir.path().join(ARCHIVE_FILE)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["record"]["National_ID"], nid_for(0).canonical());
    assert_eq!(first["record"]["Death_date"], "2020-01-01");

    let reg = Registry::open(dir.path()).unwrap();
    assert_eq!(reg.archive_entries(), 2);
    assert_eq!(reg.view().archived_count(), 2);
}

#[test]
fn missing_archive_line_is_restored_on_open() {
    let dir = tempfile::tempdir().unwrap();
    {
        let mut reg = Registry::open(dir.path()).unwrap();
        reg.insert_citizen(CitizenRecord::new(nid_for(5))).unwrap();
        reg.archive_deceased(&nid_for(5).canonical(), date("2020-01-01")).unwrap();
    }
    // simulate a crash between the log append and the archive append
    std::fs::write(dir.path().join(ARCHIVE_FILE), "").unwrap();
    let reg = Registry::open(dir.path()).unwrap();
    assert_eq!(reg.archive_entries(), 1);
    let text = std::fs::read_to_string(dir.path().join(ARCHIVE_FILE)).unwrap();
    assert!(text.contains(&nid_for(5).canonical()));
}

#[test]
fn reopen_recovers_state_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let hash = {
        let mut reg = Registry::open(dir.path()).unwrap();
        for i in 0..50 {
            reg.insert_citizen(synthetic_citizen(&mut rng, nid_for(i))).unwrap();
        }
        reg.checkpoint().unwrap();
        for i in 50..60 {
            reg.insert_citizen(synthetic_citizen(&mut rng, nid_for(i))).unwrap();
        }
        reg.state_hash()
    };
    let reg = Registry::open(dir.path()).unwrap();
    assert_eq!(reg.state_hash(), hash);
    assert_eq!(reg.view().live_count(), 60);
}

#[test]
fn replica_built_from_entries_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut primary = Registry::in_memory();
    for i in 0..20 {
        primary.insert_citizen(synthetic_citizen(&mut rng, nid_for(i))).unwrap();
    }
    primary.archive_deceased(&nid_for(3).canonical(), date("2021-01-01")).unwrap();
    let mut replica = Registry::in_memory();
    for e in primary.log().entries() {
        replica.apply_replicated(e.clone()).unwrap();
    }
    assert_eq!(replica.state_hash(), primary.state_hash());
    assert_eq!(replica.archive_entries(), 1);
    let rebuilt = Registry::from_log(primary.log().clone()).unwrap();
    assert_eq!(rebuilt.state_hash(), primary.state_hash());
}

#[test]
fn truncate_rebuilds_state() {
    let mut reg = Registry::in_memory();
    reg.insert_citizen(CitizenRecord::new(nid_for(1))).unwrap();
    let h1 = reg.state_hash();
    reg.insert_citizen(CitizenRecord::new(nid_for(2))).unwrap();
    reg.truncate_after(1).unwrap();
    assert_eq!(reg.state_hash(), h1);
    assert_eq!(reg.last_seq(), 1);
}

/// Naive comparison oracle: serialize the whole record to JSON and compare
/// each claim against the raw JSON value.
fn oracle(record: &CitizenRecord, claims: &BTreeMap<String, String>) -> BTreeMap<String, FieldVerdict> {
    use base64::Engine;
    let json = serde_json::to_value(record).unwrap();
    let obj = json.as_object().unwrap();
    claims
        .iter()
        .map(|(k, claim)| {
            let verdict = match obj.get(k) {
                None => FieldVerdict::UnknownField,
                Some(v) => {
                    let equal = if matches!(k.as_str(), "Picture" | "IRIS_DNA" | "F_print") {
                        let stored = base64::engine::general_purpose::STANDARD.decode(v.as_str().unwrap()).unwrap();
                        base64::engine::general_purpose::STANDARD.decode(claim.trim()).ok() == Some(stored)
                    } else {
                        let stored = match v {
                            serde_json::Value::Null => String::new(),
                            serde_json::Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        stored.trim() == claim.trim()
                    };
                    if equal {
                        FieldVerdict::Match
                    } else {
                        FieldVerdict::Mismatch
                    }
                }
            };
            (k.clone(), verdict)
        })
        .collect()
}

/// Claims built from a record: some exact, some padded, some wrong, some
/// empty, some for columns that do not exist.
fn random_claims(rng: &mut ChaCha8Rng, record: &CitizenRecord) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for col in CitizenRecord::COLUMNS {
        if rng.random_bool(0.5) {
            continue;
        }
        let stored = record.field_text(col).unwrap().into_owned();
        let claim = match rng.random_range(0..5) {
            0 | 1 => stored,
            2 => format!("  {stored} "),
            3 => String::new(),
            _ => crate::synth::bengali_word(rng, 1, 6),
        };
        out.insert(col.to_string(), claim);
    }
    for i in 0..rng.random_range(0..3) {
        out.insert(format!("unknown_col_{i}"), crate::synth::bengali_word(rng, 2, 5));
    }
    out
}

/// Every stored value of length >= 2 except the national id (echoed by
/// design) and DID (a surrogate that may coincide with id digits).
fn disclosed(report_json: &str, record: &CitizenRecord) -> Option<String> {
    for col in CitizenRecord::COLUMNS.iter().filter(|c| !matches!(**c, "National_ID" | "DID")) {
        if let Some(blob) = record.blob(col) {
            if blob.len() >= 2 && report_json.as_bytes().windows(blob.len()).any(|w| w == blob.0.as_slice()) {
                return Some(col.to_string());
            }
            continue;
        }
        let text = record.field_text(col).unwrap();
        if text.chars().count() >= 2 && report_json.contains(text.as_ref()) {
            return Some(col.to_string());
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn verification_agrees_with_oracle_and_discloses_nothing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reg = Registry::in_memory();
        let id = nid_for(rng.random_range(0..1_000_000));
        reg.insert_citizen(synthetic_citizen(&mut rng, id)).unwrap();
        let stored = reg.view().citizen(&id).unwrap().unwrap();
        for _ in 0..8 {
            let c = random_claims(&mut rng, &stored);
            let report = reg.verify_fields(&id.canonical(), &c).unwrap();
            prop_assert_eq!(&report.results, &oracle(&stored, &c));
            let json = serde_json::to_string(&report).unwrap();
            prop_assert_eq!(disclosed(&json, &stored), None);
        }
    }

    #[test]
    fn archive_conserves_and_keeps_links(n in 1usize..20, picks in proptest::collection::vec(any::<u8>(), 1..10)) {
        let mut reg = Registry::in_memory();
        for i in 0..n {
            let id = nid_for(i as u64);
            reg.insert_citizen(CitizenRecord::new(id)).unwrap();
            reg.insert_linked(LinkedRecord::empty(LinkedTable::Education, id)).unwrap();
        }
        let total = reg.view().live_count() + reg.view().archived_count();
        for p in picks {
            let target = nid_for(u64::from(p) % n as u64);
            let _ = reg.archive_deceased(&target.canonical(), NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
            prop_assert_eq!(reg.view().live_count() + reg.view().archived_count(), total);
            // every live linked row resolves to a live citizen
            for (k, _) in reg.state().range("linked/".to_string()..).take_while(|(k, _)| k.starts_with("linked/")) {
                let nid_text = k.split('/').nth(2).unwrap();
                prop_assert!(reg.view().is_live(&parse_nid(nid_text).unwrap()));
            }
        }
    }

    #[test]
    fn versions_strictly_increase(updates in proptest::collection::vec("[0-9]{3,11}", 1..12)) {
        let mut reg = Registry::in_memory();
        reg.insert_citizen(CitizenRecord::new(nid_for(1))).unwrap();
        let mut last = 1;
        for phone in updates {
            let v = reg.update_citizen(&nid_for(1).canonical(), &claims(&[("Phone", &phone)]), &authority()).unwrap();
            prop_assert!(v > last);
            last = v;
        }
        let history = reg.history(&nid_for(1)).unwrap();
        prop_assert!(history.windows(2).all(|w| w[0].version < w[1].version));
    }
}
