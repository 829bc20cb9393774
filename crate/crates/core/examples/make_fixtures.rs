//! Regenerates the committed test fixtures under `fixtures/`.
//!
//! cargo run -p cmdb-core --example make_fixtures -- fixtures
//!
//! Output is deterministic: the filler prose comes from a seeded generator
//! and PDFs carry no timestamps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cmdb_core::agent::ScriptEntry;
use cmdb_core::agent::Stage;
use cmdb_core::eval::{GroundTruthDoc, GtModel};
use cmdb_core::schema::{
    normalize_equation, shift_decimal, ConstitutiveModelRecord, MaterialClass, MaterialMeta, MechanismClass,
    ParameterEntry, ResolutionFlag, SymbolBinding, ValidationInfo,
};
use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Document, Object, Stream, StringFormat};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const LINE_WIDTH: usize = 92;
const LINES_PER_PAGE: usize = 56;
const TARGET_CHARS: usize = 48_000;

const WORDS: &[&str] = &[
    "specimens", "masonry", "loading", "response", "observed", "samples", "laboratory", "measured", "behaviour",
    "curves", "strain", "stress", "moisture", "conditions", "curing", "cyclic", "monotonic", "failure", "cracking",
    "stiffness", "strength", "analysis", "calibration", "procedure", "results", "material", "microstructure",
    "porosity", "grain", "binder", "interface", "joint", "compression", "tension", "shear", "creep", "relaxation",
    "heritage", "structures", "historic", "buildings", "degradation", "weathering", "testing", "apparatus",
    "displacement", "transducers", "frame", "platen", "friction", "confinement", "scatter", "repeatability",
    "mean", "values", "trend", "clearly", "slightly", "markedly", "consistent", "previous", "studies", "literature",
    "approach", "framework", "numerical", "implementation", "finite", "element", "simulations", "agreement",
    "discrepancy", "range", "temperature", "humidity", "saturation", "drying", "wetting", "specimen", "geometry",
    "prismatic", "cylindrical", "cubic", "rate", "controlled", "protocol", "recorded", "data", "fitted",
    "parameters", "identified", "sensitivity", "robust", "reliable", "significant", "ductile", "brittle",
    "softening", "hardening", "dilatancy", "volumetric", "deviatoric", "axial", "lateral", "unloading",
    "reloading", "hysteresis", "dissipation", "energy", "fracture", "process", "zone", "mortar", "lime", "clay",
    "stone", "brick", "timber", "earth", "suspension", "flow", "viscosity", "thixotropy", "structure",
];
const GLUE: &[&str] = &["the", "of", "and", "in", "with", "for", "under", "from", "during", "between", "was", "were"];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(9..19);
    let mut words: Vec<String> = Vec::with_capacity(n);
    for i in 0..n {
        let w = if i % 3 == 1 { GLUE.choose(rng) } else { WORDS.choose(rng) };
        words.push(w.unwrap().to_string());
    }
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

fn paragraph(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    (0..sentences).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
}

fn wrap(text: &str) -> Vec<String> {
    let mut lines = Vec::new();
    let mut line = String::new();
    for w in text.split_whitespace() {
        if !line.is_empty() && line.chars().count() + 1 + w.chars().count() > LINE_WIDTH {
            lines.push(std::mem::take(&mut line));
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(w);
    }
    if !line.is_empty() {
        lines.push(line);
    }
    lines
}

/// Pieces of a synthetic paper. Display, table and inline parts are each one
/// candidate block; prose never is.
enum Part {
    Heading(&'static str),
    Text(String),
    Filler(usize),
    Display(String),
    Table(Vec<String>),
    Inline(String),
}

struct Paper {
    id: &'static str,
    title: &'static str,
    abstract_text: &'static str,
    body: Vec<Part>,
    gate: Value,
    gate_repair: Option<&'static str>,
    records: Vec<ConstitutiveModelRecord>,
    first_attempt_invalid: Option<Value>,
    gt: Option<Vec<GtModel>>,
}

impl Paper {
    fn candidates(&self) -> usize {
        self.body
            .iter()
            .filter(|p| matches!(p, Part::Display(_) | Part::Table(_) | Part::Inline(_)))
            .count()
    }

    fn lines(&self, rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut lines = vec![self.title.to_string(), "Research article".to_string(), String::new()];
        lines.extend(wrap(&format!("Abstract. {}", self.abstract_text)));
        lines.push(String::new());
        let mut chars: usize = lines.iter().map(|l| l.len()).sum();
        for part in &self.body {
            let new: Vec<String> = match part {
                Part::Heading(h) => vec![String::new(), h.to_string()],
                Part::Text(t) => wrap(t),
                Part::Filler(n) => {
                    let mut out = Vec::new();
                    for _ in 0..*n {
                        out.extend(wrap(&paragraph(rng, 6)));
                    }
                    out
                }
                Part::Display(eq) => vec![format!("\\[ {eq} \\]")],
                Part::Table(rows) => {
                    let mut out = vec!["\\begin{tabular}{lll}".to_string()];
                    out.extend(rows.iter().map(|r| format!("{r} \\\\")));
                    out.push("\\end{tabular}".to_string());
                    out
                }
                Part::Inline(s) => wrap(s),
            };
            chars += new.iter().map(|l| l.len()).sum::<usize>();
            lines.extend(new);
        }
        // pad with closing prose up to the target size
        lines.push(String::new());
        lines.push("Discussion".to_string());
        while chars < TARGET_CHARS {
            let p = wrap(&paragraph(rng, 7));
            chars += p.iter().map(|l| l.len()).sum::<usize>();
            lines.extend(p);
        }
        lines
    }
}

fn sym(s: &str, d: &str, u: &str) -> SymbolBinding {
    SymbolBinding::new(s, d, u)
}

fn material(name: &str, class: MaterialClass, note: &str, conditions: &str) -> MaterialMeta {
    MaterialMeta {
        material_name: name.into(),
        material_class: class,
        provenance_note: note.into(),
        test_conditions: conditions.into(),
    }
}

fn param(symbol: &str, value: f64, unit: &str, provenance: &str) -> ParameterEntry {
    ParameterEntry::from_printed(symbol, value, None, unit, provenance, None).expect("fixture parameter")
}

#[allow(clippy::too_many_arguments)]
fn record(
    doc: &str,
    eq: &str,
    map: Vec<SymbolBinding>,
    mat: MaterialMeta,
    params: Vec<ParameterEntry>,
    validation: &str,
    mech: MechanismClass,
    confidence: f64,
) -> ConstitutiveModelRecord {
    ConstitutiveModelRecord::build(doc, eq, map, mat, params, ValidationInfo::new(validation), mech, confidence)
        .unwrap_or_else(|r| panic!("fixture record for {doc} invalid: {:?}", r.errors))
}

fn gt_of(r: &ConstitutiveModelRecord) -> GtModel {
    GtModel {
        equation_canonical: normalize_equation(&r.equation_latex).unwrap(),
        symbol_map: r.symbol_map.clone(),
        material_name: r.material.material_name.clone(),
        mechanism: r.mechanism,
    }
}

fn gate(domain: bool, theory: bool, experiment: bool, rationale: &str, score: Option<f64>) -> Value {
    let mut v = json!({
        "domain_relevance": domain,
        "theoretical_content": theory,
        "experimental_validation": experiment,
        "rationale": rationale,
    });
    if let Some(s) = score {
        v["score"] = json!(s);
    }
    v
}

/// Model-facing form of a record: bookkeeping fields are stamped locally.
fn as_model_output(r: &ConstitutiveModelRecord) -> Value {
    let mut v = serde_json::to_value(r).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("doc_id");
    obj.remove("record_id");
    obj.remove("review_status");
    v
}

fn tail_filler() -> Part {
    Part::Filler(4)
}

fn papers() -> Vec<Paper> {
    let mut out = Vec::new();

    // A: sandstone, damage model in two equations
    {
        let id = "sandstone-damage";
        let mat = material("Sandstone", MaterialClass::Stone, "Quarried building sandstone", "Uniaxial compression, dry");
        let a1 = record(
            id,
            r"\sigma = (1 - D) E \epsilon",
            vec![
                sym(r"\sigma", "axial stress", "Pa"),
                sym("D", "scalar damage variable", "dimensionless"),
                sym("E", "Young's modulus of the undamaged stone", "Pa"),
                sym(r"\epsilon", "axial strain", "dimensionless"),
            ],
            mat.clone(),
            vec![param("E", 12.4, "GPa", "Table 2")],
            "uniaxial compression tests on cylindrical specimens",
            MechanismClass::FailureDamage,
            0.92,
        );
        let a2 = record(
            id,
            r"D = 1 - \exp\left(-\left(\frac{\epsilon}{\epsilon_0}\right)^{m}\right)",
            vec![
                sym("D", "scalar damage variable", "dimensionless"),
                sym(r"\epsilon", "axial strain", "dimensionless"),
                sym(r"\epsilon_0", "reference strain of the Weibull law", "dimensionless"),
                sym("m", "Weibull shape parameter", "dimensionless"),
            ],
            mat,
            vec![
                param(r"\epsilon_0", 0.0032, "dimensionless", "Table 2"),
                param("m", 2.1, "dimensionless", "Table 2"),
            ],
            "uniaxial compression tests on cylindrical specimens",
            MechanismClass::FailureDamage,
            0.88,
        );
        out.push(Paper {
            id,
            title: "Continuum damage of a quarried sandstone under uniaxial compression",
            abstract_text: "We propose a continuum damage law for a historic building sandstone. A scalar damage \
                variable degrades the elastic stiffness and evolves with axial strain according to a Weibull \
                distribution. The law is calibrated and validated against uniaxial compression tests on \
                cylindrical specimens from the original quarry.",
            body: vec![
                Part::Heading("Introduction"),
                Part::Filler(6),
                Part::Heading("Damage formulation"),
                Part::Text("The stress strain relation of the damaged stone reads".into()),
                Part::Display(a1.equation_latex.clone()),
                Part::Text("and the damage variable grows with strain as".into()),
                Part::Display(a2.equation_latex.clone()),
                Part::Text("The total strain splits additively into its elastic and inelastic parts".into()),
                Part::Display(r"\epsilon = \epsilon_e + \epsilon_p".into()),
                Part::Filler(5),
                Part::Heading("Experimental programme"),
                Part::Filler(5),
                Part::Inline(r"Poisson's ratio was fixed at $\nu = 0.21$ for all specimens.".into()),
                Part::Table(vec![
                    "Parameter & Value & Unit".into(),
                    "E & 12.4 & GPa".into(),
                    r"\epsilon_0 & 0.0032 & --".into(),
                    "m & 2.1 & --".into(),
                ]),
                Part::Filler(6),
                Part::Text("The damage energy release rate follows from the free energy as".into()),
                Part::Display(r"Y = \frac{1}{2} E \epsilon^2".into()),
                tail_filler(),
            ],
            gate: gate(true, true, true, "Damage law for sandstone calibrated on compression tests.", Some(0.95)),
            gate_repair: None,
            gt: Some(vec![gt_of(&a1), gt_of(&a2)]),
            records: vec![a1, a2],
            first_attempt_invalid: None,
        });
    }

    // B: lime mortar plasticity; the analyst also returns an intermediate
    // derivation step and needs one repair round
    {
        let id = "lime-mortar-plasticity";
        let mat = material("Lime mortar", MaterialClass::Mortar, "Hydraulic lime mortar, ninety day cure", "Triaxial compression");
        let map = vec![
            sym("f", "yield function", "Pa"),
            sym("J_2", "second invariant of the deviatoric stress", "Pa^2"),
            sym(r"\alpha", "pressure sensitivity coefficient", "dimensionless"),
            sym("I_1", "first invariant of the stress tensor", "Pa"),
            sym("k", "cohesion parameter", "Pa"),
        ];
        let b1 = record(
            id,
            r"f = \sqrt{J_2} + \alpha I_1 - k = 0",
            map.clone(),
            mat.clone(),
            vec![param(r"\alpha", 0.21, "dimensionless", "Table 3"), param("k", 0.35, "MPa", "Table 3")],
            "triaxial compression tests at three confining pressures",
            MechanismClass::ElastoPlasticity,
            0.9,
        );
        let b2 = record(
            id,
            r"\sqrt{J_2} = k - \alpha I_1",
            map[1..].to_vec(),
            mat,
            vec![],
            "triaxial compression tests at three confining pressures",
            MechanismClass::ElastoPlasticity,
            0.45,
        );
        let mut invalid = json!({"records": [as_model_output(&b1), as_model_output(&b2)]});
        // drop the binding of alpha so grounding fails on the first attempt
        invalid["records"][0]["symbol_map"].as_array_mut().unwrap().remove(2);
        out.push(Paper {
            id,
            title: "A pressure sensitive yield criterion for hydraulic lime mortar",
            abstract_text: "A Drucker Prager type yield criterion is proposed for hydraulic lime mortar used in \
                the repair of historic masonry. The criterion is calibrated on triaxial compression tests at \
                three confining pressures and reproduces the observed pressure sensitivity of strength.",
            body: vec![
                Part::Heading("Introduction"),
                Part::Filler(5),
                Part::Heading("Yield criterion"),
                Part::Text("The invariants of the stress tensor are".into()),
                Part::Display(r"I_1 = \sigma_1 + \sigma_2 + \sigma_3".into()),
                Part::Text("and the proposed yield function is".into()),
                Part::Display(b1.equation_latex.clone()),
                Part::Text("Solving for the deviatoric invariant on the yield surface gives".into()),
                Part::Display(b2.equation_latex.clone()),
                Part::Filler(6),
                Part::Heading("Triaxial tests"),
                Part::Filler(4),
                Part::Table(vec![
                    "Parameter & Value & Unit".into(),
                    r"\alpha & 0.21 & --".into(),
                    "k & 0.35 & MPa".into(),
                ]),
                Part::Filler(5),
                Part::Inline(r"The dilatancy angle was taken as $\psi = 0.5 \phi$ throughout.".into()),
                tail_filler(),
            ],
            gate: gate(true, true, true, "Yield criterion for lime mortar validated on triaxial tests.", Some(0.91)),
            gate_repair: None,
            gt: Some(vec![gt_of(&b1)]),
            records: vec![b1, b2],
            first_attempt_invalid: Some(invalid),
        });
    }

    // C: kaolinite suspension with a scaled viscosity in the table header
    {
        let id = "kaolinite-thixotropy";
        let eta = ParameterEntry {
            symbol: r"\eta_\infty".into(),
            value_raw: 2.33,
            scale_notation: Some("×10^3".into()),
            unit_raw: "Pa·s".into(),
            value_si: shift_decimal(2.33, -3),
            unit_si: "Pa·s".into(),
            provenance: "Table 1".into(),
            resolution_flag: ResolutionFlag::ScaleResolved,
        };
        let c1 = record(
            id,
            r"\sigma + \lambda \dot{\sigma} = \eta_\infty \dot{\gamma} + \xi G \gamma, \quad \frac{d\xi}{dt} = k_1 (1 - \xi) - k_2 \xi \dot{\gamma}",
            vec![
                sym(r"\sigma", "shear stress", "Pa"),
                sym(r"\lambda", "relaxation time", "s"),
                sym(r"\dot{\sigma}", "shear stress rate", "Pa/s"),
                sym(r"\eta_\infty", "infinite shear viscosity", "Pa·s"),
                sym(r"\dot{\gamma}", "shear rate", "s^-1"),
                sym(r"\xi", "structural parameter", "dimensionless"),
                sym("G", "elastic modulus of the fully structured network", "Pa"),
                sym(r"\gamma", "shear strain", "dimensionless"),
                sym("k_1", "structure build-up rate constant", "s^-1"),
                sym("k_2", "structure breakdown coefficient", "dimensionless"),
            ],
            material("Kaolinite suspension", MaterialClass::ClaySuspension, "Kaolinite in water, solid fraction thirty percent", "Rotational rheometry"),
            vec![
                eta,
                param("G", 42.0, "Pa", "Table 1"),
                param(r"\lambda", 0.8, "s", "Table 1"),
                param("k_1", 0.05, "s^-1", "Table 1"),
                param("k_2", 0.12, "dimensionless", "Table 1"),
            ],
            "step shear rate tests in a rotational rheometer",
            MechanismClass::RheologyTimeDependent,
            0.85,
        );
        out.push(Paper {
            id,
            title: "Thixotropic Jeffreys model for concentrated kaolinite suspensions",
            abstract_text: "We combine a Jeffreys viscoelastic element with a structural kinetic equation to \
                describe thixotropy in concentrated kaolinite suspensions. Model parameters are identified from \
                step shear rate tests in a rotational rheometer and the model reproduces stress overshoot and \
                recovery.",
            body: vec![
                Part::Heading("Introduction"),
                Part::Filler(5),
                Part::Heading("Constitutive model"),
                Part::Text("The shear rate is the time derivative of the shear strain".into()),
                Part::Display(r"\dot{\gamma} = \frac{d\gamma}{dt}".into()),
                Part::Text("Stress and structure evolve together according to".into()),
                Part::Display(c1.equation_latex.clone()),
                Part::Filler(6),
                Part::Heading("Rheometry"),
                Part::Filler(5),
                Part::Table(vec![
                    "Parameter & Value & Unit".into(),
                    r"\eta_\infty \times 10^3 & 2.33 & Pa s".into(),
                    "G & 42 & Pa".into(),
                    r"\lambda & 0.8 & s".into(),
                    "k_1 & 0.05 & 1/s".into(),
                    "k_2 & 0.12 & --".into(),
                ]),
                Part::Filler(5),
                tail_filler(),
            ],
            gate: gate(true, true, true, "Thixotropic model for clay suspensions fitted to rheometry.", Some(0.93)),
            gate_repair: None,
            gt: Some(vec![gt_of(&c1)]),
            records: vec![c1],
            first_attempt_invalid: None,
        });
    }

    // D: brick joint shear strength
    {
        let id = "brick-joint-shear";
        let d1 = record(
            id,
            r"\tau = c + \sigma_n \tan\phi",
            vec![
                sym(r"\tau", "shear strength of the joint", "Pa"),
                sym("c", "cohesion", "Pa"),
                sym(r"\sigma_n", "normal stress on the joint", "Pa"),
                sym(r"\phi", "friction angle", "rad"),
            ],
            material("Fired clay brick", MaterialClass::Brick, "Solid fired clay brick with lime joints", "Triplet shear tests"),
            vec![param("c", 0.21, "MPa", "Section 4")],
            "triplet shear tests under four precompression levels",
            MechanismClass::FailureDamage,
            0.87,
        );
        out.push(Paper {
            id,
            title: "Shear strength of fired clay brick joints in historic masonry",
            abstract_text: "The shear strength of joints between fired clay bricks and lime mortar is described \
                by a Coulomb friction criterion. Cohesion and friction are identified from triplet shear tests \
                under four precompression levels on specimens extracted from a historic wall.",
            body: vec![
                Part::Heading("Introduction"),
                Part::Filler(6),
                Part::Heading("Failure criterion"),
                Part::Display(d1.equation_latex.clone()),
                Part::Filler(5),
                Part::Heading("Triplet tests"),
                Part::Text("The normal stress follows from the precompression force and the joint area".into()),
                Part::Display(r"\sigma_n = \frac{F_n}{A}".into()),
                Part::Filler(5),
                Part::Inline(r"The mean friction coefficient was $\mu = 0.74$ across all series.".into()),
                Part::Filler(4),
                tail_filler(),
            ],
            gate: gate(true, true, true, "Coulomb criterion for brick joints identified from triplet tests.", None),
            gate_repair: None,
            gt: Some(vec![gt_of(&d1)]),
            records: vec![d1],
            first_attempt_invalid: None,
        });
    }

    // E: timber creep; the time shift law is annotated but not extracted
    {
        let id = "timber-creep";
        let e1 = record(
            id,
            r"\epsilon(t) = \frac{\sigma_0}{E_1} + \frac{\sigma_0}{E_2}\left(1 - \exp(-t/\tau)\right)",
            vec![
                sym(r"\epsilon", "creep strain", "dimensionless"),
                sym("t", "time", "s"),
                sym(r"\sigma_0", "constant applied stress", "Pa"),
                sym("E_1", "instantaneous modulus", "Pa"),
                sym("E_2", "delayed modulus of the Kelvin element", "Pa"),
                sym(r"\tau", "retardation time", "s"),
            ],
            material("Timber", MaterialClass::Timber, "Old growth oak from roof trusses", "Four point bending creep, constant climate"),
            vec![
                param("E_1", 9.8, "GPa", "Table 2"),
                param("E_2", 14.5, "GPa", "Table 2"),
                param(r"\tau", 36000.0, "s", "Table 2"),
            ],
            "long term bending creep tests",
            MechanismClass::Viscoelasticity,
            0.8,
        );
        let wlf = GtModel {
            equation_canonical: normalize_equation(r"\log a_T = -\frac{C_1 (T - T_r)}{C_2 + T - T_r}").unwrap(),
            symbol_map: vec![
                sym("a_T", "time shift factor", "dimensionless"),
                sym("C_1", "first WLF constant", "dimensionless"),
                sym("C_2", "second WLF constant", "K"),
                sym("T", "temperature", "K"),
                sym("T_r", "reference temperature", "K"),
            ],
            material_name: "Timber".into(),
            mechanism: MechanismClass::Viscoelasticity,
        };
        out.push(Paper {
            id,
            title: "Creep of old growth oak from historic roof trusses",
            abstract_text: "A Burgers type creep law is calibrated for old growth oak recovered from historic \
                roof trusses. Long term four point bending tests at constant climate provide the creep curves, \
                and a time temperature shift extends the law to seasonal conditions.",
            body: vec![
                Part::Heading("Introduction"),
                Part::Filler(5),
                Part::Heading("Creep law"),
                Part::Display(e1.equation_latex.clone()),
                Part::Filler(5),
                Part::Text("Seasonal temperature is accounted for by the shift factor".into()),
                Part::Display(r"\log a_T = -\frac{C_1 (T - T_r)}{C_2 + T - T_r}".into()),
                Part::Filler(5),
                Part::Table(vec![
                    "Parameter & Value & Unit".into(),
                    "E_1 & 9.8 & GPa".into(),
                    "E_2 & 14.5 & GPa".into(),
                    r"\tau & 36000 & s".into(),
                ]),
                Part::Filler(4),
                tail_filler(),
            ],
            gate: gate(true, true, true, "Creep law for oak calibrated on bending creep tests.", Some(0.9)),
            gate_repair: None,
            gt: Some(vec![gt_of(&e1), wlf]),
            records: vec![e1],
            first_attempt_invalid: None,
        });
    }

    // F: rammed earth, moisture coupling, two separate laws
    {
        let id = "earthen-moisture";
        let mat = material("Rammed earth", MaterialClass::Earthen, "Unstabilised rammed earth from a historic wall", "Compression at controlled humidity");
        let f1 = record(
            id,
            r"E(w) = E_{\mathrm{dry}} (1 - \beta w)",
            vec![
                sym("E", "Young's modulus at moisture content w", "Pa"),
                sym("w", "gravimetric moisture content", "dimensionless"),
                sym(r"E_{\mathrm{dry}}", "Young's modulus in the dry state", "Pa"),
                sym(r"\beta", "moisture sensitivity of stiffness", "dimensionless"),
            ],
            mat.clone(),
            vec![param(r"E_{\mathrm{dry}}", 1.2, "GPa", "Table 4"), param(r"\beta", 4.1, "dimensionless", "Table 4")],
            "unconfined compression at five humidity levels",
            MechanismClass::CoupledEnvironmental,
            0.83,
        );
        let f2 = record(
            id,
            r"\sigma_c = \sigma_{c0} \exp(-\kappa w)",
            vec![
                sym(r"\sigma_c", "compressive strength", "Pa"),
                sym(r"\sigma_{c0}", "compressive strength in the dry state", "Pa"),
                sym(r"\kappa", "strength softening coefficient", "dimensionless"),
                sym("w", "gravimetric moisture content", "dimensionless"),
            ],
            mat,
            vec![param(r"\sigma_{c0}", 2.4, "MPa", "Table 4"), param(r"\kappa", 6.5, "dimensionless", "Table 4")],
            "unconfined compression at five humidity levels",
            MechanismClass::CoupledEnvironmental,
            0.9,
        );
        out.push(Paper {
            id,
            title: "Moisture dependent stiffness and strength of historic rammed earth",
            abstract_text: "Stiffness and compressive strength of unstabilised rammed earth decrease with \
                moisture content. We propose a linear stiffness law and an exponential strength law and validate \
                both with unconfined compression tests at five relative humidity levels.",
            body: vec![
                Part::Heading("Introduction"),
                Part::Filler(5),
                Part::Heading("Moisture laws"),
                Part::Display(f1.equation_latex.clone()),
                Part::Filler(3),
                Part::Display(f2.equation_latex.clone()),
                Part::Filler(5),
                Part::Heading("Compression tests"),
                Part::Text("Moisture content is the ratio of water mass to dry mass".into()),
                Part::Display(r"w = \frac{m_w}{m_d}".into()),
                Part::Filler(4),
                Part::Table(vec![
                    "Parameter & Value & Unit".into(),
                    r"E_{\mathrm{dry}} & 1.2 & GPa".into(),
                    r"\beta & 4.1 & --".into(),
                    r"\sigma_{c0} & 2.4 & MPa".into(),
                    r"\kappa & 6.5 & --".into(),
                ]),
                Part::Filler(4),
                tail_filler(),
            ],
            gate: gate(true, true, true, "Moisture coupled laws for rammed earth validated experimentally.", Some(0.97)),
            gate_repair: None,
            gt: Some(vec![gt_of(&f1), gt_of(&f2)]),
            records: vec![f1, f2],
            first_attempt_invalid: None,
        });
    }

    // G: a genuine model, but no experiments, so the gate rejects it
    {
        let tuff_eq = r"\sigma_t = \sigma_{t0} (1 - \delta N)";
        out.push(Paper {
            id: "tuff-weathering-model",
            title: "A weathering model for volcanic tuff facades",
            abstract_text: "We propose a phenomenological law for the loss of tensile strength of volcanic tuff \
                with the number of freeze thaw cycles. The law is discussed against field observations reported \
                in the literature but no new measurements are presented.",
            body: vec![
                Part::Heading("Introduction"),
                Part::Filler(6),
                Part::Heading("Weathering law"),
                Part::Display(tuff_eq.into()),
                Part::Filler(8),
                tail_filler(),
            ],
            gate: gate(true, true, false, "Model for tuff but no experimental validation.", None),
            gate_repair: None,
            gt: Some(vec![GtModel {
                equation_canonical: normalize_equation(tuff_eq).unwrap(),
                symbol_map: vec![
                    sym(r"\sigma_t", "tensile strength", "Pa"),
                    sym(r"\sigma_{t0}", "initial tensile strength", "Pa"),
                    sym(r"\delta", "strength loss per cycle", "dimensionless"),
                    sym("N", "number of freeze thaw cycles", "dimensionless"),
                ],
                material_name: "Volcanic tuff".into(),
                mechanism: MechanismClass::FailureDamage,
            }]),
            records: vec![],
            first_attempt_invalid: None,
        });
    }

    // Rejected documents that are still annotated (no models inside)
    let rejected_with_gt: [(&str, &str, &str, Vec<Part>, Value); 5] = [
        (
            "masonry-review",
            "Constitutive modelling of historic masonry: a review",
            "This review surveys constitutive models for historic masonry from the past decades and \
             classifies them by scale and mechanism. No new model is proposed.",
            vec![
                Part::Heading("Introduction"),
                Part::Filler(8),
                Part::Display(r"\sigma = D \epsilon".into()),
                Part::Filler(8),
            ],
            gate(true, false, false, "Review article without a new model.", None),
        ),
        (
            "steel-fatigue",
            "Fatigue crack growth in structural steel connections",
            "We calibrate a crack growth law for welded structural steel connections under variable \
             amplitude loading and compare it with laboratory fatigue tests.",
            vec![
                Part::Heading("Introduction"),
                Part::Filler(6),
                Part::Display(r"\frac{da}{dN} = C \Delta K^{n}".into()),
                Part::Filler(6),
                Part::Table(vec!["Parameter & Value & Unit".into(), "n & 3.1 & --".into()]),
                Part::Filler(4),
            ],
            gate(false, true, true, "Steel is outside the material scope.", None),
        ),
        (
            "mortar-porosimetry",
            "Pore structure of historic lime mortars by mercury intrusion",
            "Mercury intrusion porosimetry is used to characterise the pore structure of historic lime \
             mortars sampled from six monuments. Mechanical behaviour is not modelled.",
            vec![
                Part::Heading("Introduction"),
                Part::Filler(7),
                Part::Table(vec!["Site & Porosity & Unit".into(), "North & 28 & %".into(), "South & 31 & %".into()]),
                Part::Filler(7),
            ],
            gate(true, false, true, "Characterisation study without a constitutive model.", None),
        ),
        (
            "polymer-foam-hyperelastic",
            "Hyperelastic model for closed cell polymer foams",
            "A hyperelastic strain energy function is proposed for closed cell polymer foams and validated \
             with uniaxial and biaxial tests.",
            vec![
                Part::Heading("Introduction"),
                Part::Filler(6),
                Part::Display(r"W = \sum_{i} \frac{2 \mu_i}{\alpha_i^2} \lambda_i".into()),
                Part::Filler(8),
            ],
            gate(false, true, true, "Polymer foams are outside the material scope.", Some(0.2)),
        ),
        (
            "adobe-fem-parametric",
            "Parametric finite element study of adobe walls",
            "A parametric finite element study explores the influence of wall slenderness on the seismic \
             capacity of adobe walls using an existing smeared crack model.",
            vec![
                Part::Heading("Introduction"),
                Part::Filler(8),
                Part::Inline(r"The slenderness ratio was varied as $h / t = 6$ to twelve.".into()),
                Part::Filler(7),
            ],
            gate(true, false, false, "Parametric study of an existing model.", None),
        ),
    ];
    for (id, title, abstract_text, body, verdict) in rejected_with_gt {
        out.push(Paper {
            id,
            title,
            abstract_text,
            body,
            gate: verdict,
            gate_repair: None,
            records: vec![],
            first_attempt_invalid: None,
            gt: Some(vec![]),
        });
    }

    // Rejected documents outside the annotated set
    let unannotated: [(&str, &str, &str, Value, Option<&str>); 8] = [
        (
            "river-sediment-transport",
            "Sediment transport in braided rivers",
            "Field measurements of bedload transport in braided gravel rivers are analysed.",
            gate(false, false, true, "Hydrology, not material mechanics.", None),
            None,
        ),
        (
            "bridge-monitoring-network",
            "A sensor network for long term bridge monitoring",
            "We describe a wireless sensor network deployed on a motorway bridge.",
            gate(false, false, false, "Monitoring hardware paper.", None),
            None,
        ),
        (
            "glass-fracture-optics",
            "Optical detection of fracture in laminated glass",
            "An optical method detects fracture in laminated glass panels.",
            gate(false, false, true, "Glass fracture detection, no model.", None),
            None,
        ),
        (
            "soil-microbiome",
            "Microbial communities in agricultural soils",
            "We sequence microbial communities in agricultural soils across a climate gradient.",
            gate(false, false, false, "Microbiology.", None),
            None,
        ),
        (
            "roman-concrete-chemistry",
            "Mineralogy of Roman marine concrete",
            "The mineral phases of Roman marine concrete are identified by diffraction.",
            gate(true, false, true, "Chemistry of a heritage material, no mechanics model.", None),
            None,
        ),
        (
            "cultural-tourism-survey",
            "Visitor perception of restored heritage sites",
            "A survey of visitor perception at restored heritage sites.",
            gate(false, false, false, "Social science survey.", None),
            None,
        ),
        (
            "graphene-thermal",
            "Thermal conductivity of suspended graphene",
            "Thermal conductivity of suspended graphene sheets is measured by Raman thermometry.",
            gate(false, false, true, "Outside the scope.", None),
            Some("The paper is about graphene thermal transport, so it is not relevant."),
        ),
        (
            "wind-turbine-blades",
            "Composite damage in wind turbine blades",
            "A progressive damage model for glass fibre composite blades is validated on coupon tests.",
            gate(false, true, true, "Fibre composites are outside the scope.", Some(0.3)),
            None,
        ),
    ];
    for (id, title, abstract_text, verdict, malformed) in unannotated {
        out.push(Paper {
            id,
            title,
            abstract_text,
            body: vec![Part::Heading("Introduction"), Part::Filler(12)],
            gate: verdict,
            gate_repair: malformed,
            records: vec![],
            first_attempt_invalid: None,
            gt: None,
        });
    }
    out
}

// PDF writing

const TO_UNICODE_HEADER: &str = "/CIDInit /ProcSet findresource begin\n12 dict begin\nbegincmap\n\
/CIDSystemInfo << /Registry (Adobe) /Ordering (UCS) /Supplement 0 >> def\n\
/CMapName /Adobe-Identity-UCS def\n/CMapType 2 def\n1 begincodespacerange\n<0000> <FFFF>\nendcodespacerange\n";
const TO_UNICODE_FOOTER: &str = "endcmap\nCMapName currentdict /CMap defineresource pop\nend\nend\n";

/// Identity ToUnicode map over the BMP (surrogates excluded), one range per
/// high byte and at most one hundred ranges per block.
fn to_unicode_cmap() -> String {
    let highs: Vec<u32> = (0u32..=0xff).filter(|h| !(0xd8..=0xdf).contains(h)).collect();
    let mut out = TO_UNICODE_HEADER.to_string();
    for chunk in highs.chunks(100) {
        out.push_str(&format!("{} beginbfrange\n", chunk.len()));
        for h in chunk {
            out.push_str(&format!("<{h:02X}00> <{h:02X}FF> <{h:02X}00>\n"));
        }
        out.push_str("endbfrange\n");
    }
    out.push_str(TO_UNICODE_FOOTER);
    out
}

fn utf16_hex(s: &str) -> Object {
    let bytes: Vec<u8> = s
        .chars()
        .flat_map(|c| {
            let code = u32::from(c);
            assert!(code <= 0xffff, "fixture text is BMP only");
            [(code >> 8) as u8, code as u8]
        })
        .collect();
    Object::String(bytes, StringFormat::Hexadecimal)
}

struct PdfBuilder {
    doc: Document,
    pages_id: lopdf::ObjectId,
    font_id: lopdf::ObjectId,
    kids: Vec<Object>,
}

impl PdfBuilder {
    fn new() -> Self {
        let mut doc = Document::with_version("1.5");
        let pages_id = doc.new_object_id();
        let cmap = Stream::new(dictionary! {}, to_unicode_cmap().into_bytes());
        let cmap_id = doc.add_object(cmap);
        let descriptor_id = doc.add_object(dictionary! {
            "Type" => "FontDescriptor",
            "FontName" => "NotoSans",
            "Flags" => 32,
            "FontBBox" => vec![0.into(), (-200).into(), 1000.into(), 900.into()],
            "ItalicAngle" => 0,
            "Ascent" => 900,
            "Descent" => -200,
            "CapHeight" => 700,
            "StemV" => 80,
        });
        let cid_font_id = doc.add_object(dictionary! {
            "Type" => "Font",
            "Subtype" => "CIDFontType2",
            "BaseFont" => "NotoSans",
            "CIDSystemInfo" => dictionary! {
                "Registry" => Object::string_literal("Adobe"),
                "Ordering" => Object::string_literal("Identity"),
                "Supplement" => 0,
            },
            "FontDescriptor" => descriptor_id,
            "DW" => 500,
            "CIDToGIDMap" => "Identity",
        });
        let font_id = doc.add_object(dictionary! {
            "Type" => "Font",
            "Subtype" => "Type0",
            "BaseFont" => "NotoSans",
            "Encoding" => "Identity-H",
            "DescendantFonts" => vec![cid_font_id.into()],
            "ToUnicode" => cmap_id,
        });
        Self {
            doc,
            pages_id,
            font_id,
            kids: Vec::new(),
        }
    }

    fn add_page(&mut self, operations: Vec<Operation>, extra_resources: Option<lopdf::Dictionary>) {
        let content = Content { operations };
        let mut stream = Stream::new(dictionary! {}, content.encode().unwrap());
        stream.compress().unwrap();
        let content_id = self.doc.add_object(stream);
        let mut resources = dictionary! {
            "Font" => dictionary! { "F1" => self.font_id },
        };
        if let Some(extra) = extra_resources {
            for (k, v) in extra.into_iter() {
                resources.set(k, v);
            }
        }
        let page_id = self.doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => self.pages_id,
            "MediaBox" => vec![0.into(), 0.into(), 612.into(), 792.into()],
            "Contents" => content_id,
            "Resources" => resources,
        });
        self.kids.push(page_id.into());
    }

    fn add_text_page(&mut self, lines: &[String]) {
        let mut ops = vec![
            Operation::new("BT", vec![]),
            Operation::new("Tf", vec!["F1".into(), 9.into()]),
            Operation::new("TL", vec![12.into()]),
            Operation::new("Td", vec![40.into(), 760.into()]),
        ];
        for (i, line) in lines.iter().enumerate() {
            if i > 0 {
                ops.push(Operation::new("T*", vec![]));
            }
            if !line.is_empty() {
                ops.push(Operation::new("Tj", vec![utf16_hex(line)]));
            }
        }
        ops.push(Operation::new("ET", vec![]));
        self.add_page(ops, None);
    }

    fn finish(mut self, file_id: &str) -> Document {
        let count = self.kids.len() as i64;
        self.doc.objects.insert(
            self.pages_id,
            Object::Dictionary(dictionary! {
                "Type" => "Pages",
                "Kids" => self.kids,
                "Count" => count,
            }),
        );
        let catalog_id = self.doc.add_object(dictionary! {
            "Type" => "Catalog",
            "Pages" => self.pages_id,
        });
        self.doc.trailer.set("Root", catalog_id);
        let id = Object::String(file_id.as_bytes().to_vec(), StringFormat::Hexadecimal);
        self.doc.trailer.set("ID", vec![id.clone(), id]);
        self.doc
    }
}

fn write_text_pdf(path: &Path, lines: &[String], file_id: &str) {
    let mut b = PdfBuilder::new();
    let pages: Vec<&[String]> = if lines.is_empty() { vec![&[][..]] } else { lines.chunks(LINES_PER_PAGE).collect() };
    for page in pages {
        b.add_text_page(page);
    }
    let mut doc = b.finish(file_id);
    doc.save(path).unwrap();
}

fn write_image_only_pdf(path: &Path) {
    let mut b = PdfBuilder::new();
    let pixels: Vec<u8> = (0..64u32).map(|i| (i * 4) as u8).collect();
    let image = Stream::new(
        dictionary! {
            "Type" => "XObject",
            "Subtype" => "Image",
            "Width" => 8,
            "Height" => 8,
            "ColorSpace" => "DeviceGray",
            "BitsPerComponent" => 8,
        },
        pixels,
    );
    let image_id = b.doc.add_object(image);
    let ops = vec![
        Operation::new("q", vec![]),
        Operation::new("cm", vec![400.into(), 0.into(), 0.into(), 400.into(), 100.into(), 200.into()]),
        Operation::new("Do", vec!["Im1".into()]),
        Operation::new("Q", vec![]),
    ];
    b.add_page(ops, Some(dictionary! { "XObject" => dictionary! { "Im1" => image_id } }));
    let mut doc = b.finish("image-only");
    doc.save(path).unwrap();
}

fn write_encrypted_pdf(path: &Path) {
    let mut b = PdfBuilder::new();
    b.add_text_page(&["Confidential report on mortar strength".to_string()]);
    let mut doc = b.finish("encrypted-fixture");
    let version = lopdf::EncryptionVersion::V2 {
        document: &doc,
        owner_password: "owner",
        user_password: "secret",
        key_length: 128,
        permissions: lopdf::Permissions::all(),
    };
    let state = lopdf::EncryptionState::try_from(version).unwrap();
    doc.encrypt(&state).unwrap();
    doc.save(path).unwrap();
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let corpus = root.join("corpus");
    let edge = root.join("edge");
    std::fs::create_dir_all(&corpus).unwrap();
    std::fs::create_dir_all(&edge).unwrap();

    let mut script: Vec<ScriptEntry> = Vec::new();
    let mut gt_lines = Vec::new();
    let mut manifest = BTreeMap::new();

    for (i, paper) in papers().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let lines = paper.lines(&mut rng);
        write_text_pdf(&corpus.join(format!("{}.pdf", paper.id)), &lines, paper.id);

        match paper.gate_repair {
            Some(bad) => {
                script.push(entry(Stage::Gatekeeper, paper.id, Some(1), bad.to_string()));
                script.push(entry(Stage::Gatekeeper, paper.id, Some(2), paper.gate.to_string()));
            }
            None => script.push(entry(Stage::Gatekeeper, paper.id, None, paper.gate.to_string())),
        }
        let relevant = ["domain_relevance", "theoretical_content", "experimental_validation"]
            .iter()
            .all(|k| paper.gate[k] == json!(true));
        if relevant {
            let valid = json!({"records": paper.records.iter().map(as_model_output).collect::<Vec<_>>()});
            match &paper.first_attempt_invalid {
                Some(bad) => {
                    script.push(entry(Stage::Analyst, paper.id, Some(1), bad.to_string()));
                    script.push(entry(Stage::Analyst, paper.id, Some(2), valid.to_string()));
                }
                None => script.push(entry(Stage::Analyst, paper.id, None, valid.to_string())),
            }
        }
        if let Some(models) = &paper.gt {
            let doc = GroundTruthDoc {
                doc_id: paper.id.to_string(),
                gt_models: models.clone(),
                candidate_block_count: paper.candidates() as u64,
            };
            gt_lines.push(serde_json::to_string(&doc).unwrap());
        }
        manifest.insert(
            paper.id,
            json!({
                "candidate_blocks": paper.candidates(),
                "relevant": relevant,
                "records": paper.records.len(),
                "annotated": paper.gt.as_ref().map(Vec::len),
            }),
        );
    }

    std::fs::write(root.join("mock_script.json"), serde_json::to_string_pretty(&script).unwrap()).unwrap();
    std::fs::write(root.join("gt.jsonl"), gt_lines.join("\n") + "\n").unwrap();
    std::fs::write(root.join("corpus_manifest.json"), serde_json::to_string_pretty(&manifest).unwrap() + "\n").unwrap();

    write_text_pdf(&edge.join("hello.pdf"), &["Hello σ = Eε".to_string()], "hello");
    write_text_pdf(&edge.join("empty_page.pdf"), &[], "empty");
    write_image_only_pdf(&edge.join("image_only.pdf"));
    write_encrypted_pdf(&edge.join("encrypted.pdf"));
    std::fs::write(edge.join("not_a_pdf.txt"), "This is plain text, not a PDF.\n").unwrap();
    println!("fixtures written to {}", root.display());
}

fn entry(stage: Stage, doc: &str, attempt: Option<u32>, response: String) -> ScriptEntry {
    ScriptEntry {
        stage,
        doc_id: doc.to_string(),
        attempt,
        response,
        transport_failures: 0,
    }
}
