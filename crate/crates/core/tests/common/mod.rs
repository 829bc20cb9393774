#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cmdb_core::agent::{ClientConfig, MockProvider, ProviderClient};
use cmdb_core::pipeline::{Pipeline, PipelineConfig};
use cmdb_core::store::Store;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn corpus() -> PathBuf {
    fixtures().join("corpus")
}

pub fn mock_client() -> Arc<ProviderClient> {
    let mock = MockProvider::from_file(&fixtures().join("mock_script.json")).expect("mock script");
    let config = ClientConfig {
        backoff_base_ms: 1,
        ..ClientConfig::default()
    };
    Arc::new(ProviderClient::new(Box::new(mock), config))
}

pub fn pipeline_in(workdir: &Path, client: Arc<ProviderClient>, store: Arc<Store>) -> Pipeline {
    let config = PipelineConfig {
        workdir: workdir.to_path_buf(),
        ..PipelineConfig::default()
    };
    Pipeline::new(config, client, store).expect("pipeline")
}

use cmdb_core::schema::{
    MaterialClass, MaterialMeta, MechanismClass, ParameterEntry, ReviewStatus, SymbolBinding, ValidationInfo,
};
use cmdb_core::ConstitutiveModelRecord;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MATERIAL_CLASSES: [MaterialClass; 8] = [
    MaterialClass::Stone,
    MaterialClass::Brick,
    MaterialClass::Mortar,
    MaterialClass::Timber,
    MaterialClass::Earthen,
    MaterialClass::ClaySuspension,
    MaterialClass::CompositeMasonry,
    MaterialClass::Other,
];

pub const REVIEW_STATUSES: [ReviewStatus; 4] =
    [ReviewStatus::Unverified, ReviewStatus::Verified, ReviewStatus::Rejected, ReviewStatus::Edited];

const MATERIALS: &[&str] = &[
    "Sandstone", "Limestone", "Lime mortar", "Cement mortar", "Fired clay brick", "Adobe", "Rammed earth", "Oak",
    "Spruce", "Kaolinite suspension", "Bentonite paste", "Tuff", "Granite", "Marble",
];

type Template = (&'static str, &'static [(&'static str, &'static str, &'static str)]);

/// Equations with their full symbol maps; the first listed unit is used for
/// generated parameter values.
const TEMPLATES: &[Template] = &[
    (
        r"\sigma = E \epsilon",
        &[(r"\sigma", "stress", "Pa"), ("E", "Young's modulus", "Pa"), (r"\epsilon", "strain", "dimensionless")],
    ),
    (
        r"\tau = c + \sigma_n \tan\phi",
        &[
            (r"\tau", "shear strength", "Pa"),
            ("c", "cohesion", "Pa"),
            (r"\sigma_n", "normal stress", "Pa"),
            (r"\phi", "friction angle", "rad"),
        ],
    ),
    (
        r"\sigma = \eta \dot{\gamma}",
        &[(r"\sigma", "shear stress", "Pa"), (r"\eta", "viscosity", "Pa·s"), (r"\dot{\gamma}", "shear rate", "s^-1")],
    ),
    (
        r"f = \sqrt{J_2} + \alpha I_1 - k",
        &[
            ("f", "yield function", "Pa"),
            ("J_2", "second deviatoric invariant", "Pa^2"),
            (r"\alpha", "friction coefficient", "dimensionless"),
            ("I_1", "first stress invariant", "Pa"),
            ("k", "cohesion parameter", "Pa"),
        ],
    ),
];

const MECHANISMS: [MechanismClass; 8] = MechanismClass::ALL;

/// Deterministic, schema-valid records with unique documents.
pub fn seeded_records(n: usize, seed: u64) -> Vec<ConstitutiveModelRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (eq, bindings) = TEMPLATES[rng.random_range(0..TEMPLATES.len())];
            let map: Vec<SymbolBinding> = bindings.iter().map(|(s, d, u)| SymbolBinding::new(s, d, u)).collect();
            let mut params = Vec::new();
            for (s, _, u) in bindings.iter().skip(1) {
                if *u == "rad" || *u == "Pa^2" || rng.random_bool(0.3) {
                    continue;
                }
                let v = (rng.random_range(1..100_000) as f64) / 100.0;
                params.push(ParameterEntry::from_printed(s, v, None, u, "Table 1", None).unwrap());
            }
            let name = format!("{} {}", MATERIALS.choose(&mut rng).unwrap(), ["A", "B", "c", "Mix"].choose(&mut rng).unwrap());
            let mut r = ConstitutiveModelRecord::build(
                &format!("doc-{i:05}"),
                eq,
                map,
                MaterialMeta {
                    material_name: name,
                    material_class: *MATERIAL_CLASSES.choose(&mut rng).unwrap(),
                    provenance_note: ["quarry sample", "historic wall", "laboratory mix"].choose(&mut rng).unwrap().to_string(),
                    test_conditions: "laboratory".into(),
                },
                params,
                ValidationInfo::new("compression tests"),
                *MECHANISMS.choose(&mut rng).unwrap(),
                rng.random_range(0.0..1.0),
            )
            .unwrap();
            r.review_status = *REVIEW_STATUSES.choose(&mut rng).unwrap();
            r
        })
        .collect()
}
