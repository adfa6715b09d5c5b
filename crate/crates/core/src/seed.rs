//! Seed derivation and UTC formatting.
//!
//! Every random choice in the harness draws from a ChaCha8 stream derived
//! from `(run seed, label)`, so one case's draws never depend on how many
//! other cases came before it.

use alloc::string::String;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type CaseRng = ChaCha8Rng;

/// FNV-1a over the label, mixed with the run seed through splitmix64.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn case_rng(seed: u64, label: &str) -> CaseRng {
    CaseRng::seed_from_u64(derive_seed(seed, label))
}

/// First second of 2022-01-01 UTC.
pub const FIRST_SECOND_OF_2022: i64 = 1_640_995_200;

/// Formats Unix seconds as `YYYY-MM-DD HH:MM:SS`.
pub fn format_utc(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (y, m, d) = civil_from_days(days);
    alloc::format!(
        "{y:04}-{m:02}-{d:02} {:02}:{:02}:{:02}",
        rem / 3600,
        (rem % 3600) / 60,
        rem % 60
    )
}

/// Year of a Unix timestamp (UTC).
pub fn utc_year(secs: i64) -> i64 {
    civil_from_days(secs.div_euclid(86_400)).0
}

// Howard Hinnant's days-to-civil conversion.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}
