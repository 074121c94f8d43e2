//! Seeded generator of labeled log lines for tests, demos and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use super::dataset::RawRecord;

const USERS: [&str; 8] = ["alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi"];
const DIRS: [&str; 6] = ["etc", "var", "tmp", "opt", "home", "srv"];
const STATUS: [&str; 3] = ["success", "failure", "timeout"];

/// Number of distinct templates [`synthetic_record`] draws from.
pub const SYNTHETIC_TEMPLATES: usize = 5;

fn ip<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!(
        "10.{}.{}.{}",
        rng.gen_range(0..256),
        rng.gen_range(0..256),
        rng.gen_range(1..255)
    )
}

fn path<R: Rng + ?Sized>(rng: &mut R) -> String {
    let depth = rng.gen_range(1..4);
    let mut p = String::new();
    for _ in 0..depth {
        p.push('/');
        p.push_str(DIRS.choose(rng).expect("non-empty"));
    }
    p.push('/');
    p
}

/// One message from template `template % SYNTHETIC_TEMPLATES` with random parameters.
pub fn synthetic_record<R: Rng + ?Sized>(rng: &mut R, template: usize, line_id: u64) -> RawRecord {
    let (content, template) = match template % SYNTHETIC_TEMPLATES {
        0 => (
            format!("Connected to {} on port {}", ip(rng), rng.gen_range(1..65536)),
            "Connected to <*> on port <*>",
        ),
        1 => (
            format!(
                "job {} finished in {} ms",
                rng.gen_range(1..100_000),
                rng.gen_range(1..10_000)
            ),
            "job <*> finished in <*> ms",
        ),
        2 => (
            format!(
                "User {} logged in from {}",
                USERS.choose(rng).expect("non-empty"),
                ip(rng)
            ),
            "User <*> logged in from <*>",
        ),
        3 => (
            format!(
                "Reading data from {}: {}",
                path(rng),
                STATUS.choose(rng).expect("non-empty")
            ),
            "Reading data from <*>: <*>",
        ),
        _ => (
            format!(
                "SessionID={}, initialized by OSAgent, version ({}.{}.{}).",
                rng.gen_range(10_000_000..100_000_000),
                rng.gen_range(0..10),
                rng.gen_range(0..10),
                rng.gen_range(0..10)
            ),
            "SessionID=<*>, initialized by OSAgent, version (<*>).",
        ),
    };
    RawRecord {
        line_id,
        content,
        template: template.to_string(),
    }
}

/// `n` messages cycling through the templates with random parameters.
pub fn synthetic_corpus<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<RawRecord> {
    (0..n)
        .map(|i| synthetic_record(rng, i % SYNTHETIC_TEMPLATES, i as u64 + 1))
        .collect()
}
