//! Synthetic case generator standing in for the unreleased court records.
//!
//! Each case carries keywords from its own judgment and evidence lexicons and
//! none from any other class, so the corpus is separable in keyword-indicator
//! space. The remaining text is seeded filler with decoy dates and a sprinkle
//! of diacritics so the preprocessing stages have something to do.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Case, CaseCatalogs, CaseSet, CaseType, CorpusError, Provenance};
use crate::features::EmbeddingStore;
use crate::numkit::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub case_type: CaseType,
    pub per_class: usize,
    /// One keyword lexicon per judgment class, in catalog order.
    pub lexicons: Vec<Vec<String>>,
    /// One keyword lexicon per evidence class, in catalog order.
    pub evidence_lexicons: Vec<Vec<String>>,
    pub filler: Vec<String>,
    /// Inclusive range of filler words in a pleading.
    pub pleading_words: (usize, usize),
    /// Inclusive range of judgment keywords inserted into a pleading.
    pub pleading_keywords: (usize, usize),
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

const FILLER: &[&str] = &[
    "المدعية", "المدعى", "الدعوى", "الجلسة", "المحكمة", "القاضي", "حضر", "وكيل", "الطرفين", "الزوج", "الزوجة",
    "الأولاد", "البنت", "الابن", "الطلاق", "النكاح", "عقد", "صك", "شهود", "قرر", "طلب", "أجاب", "ذكر", "قال",
    "صحيح", "المرافعة", "الحكم", "الشرعي", "بموجب", "النظام", "قائلا", "وبعرض", "مجلس", "الغائب", "ادعت", "ادعى",
    "موكلي", "الأسباب", "التالية", "الزواج", "ثم", "ولكن", "هذا", "كله", "في", "من", "على", "إلى", "وقد", "الموافق",
    "الحاضر", "أصالة", "سجل", "مدني", "الهوية", "الوطنية", "المقيم", "بمدينة", "جدة", "الرياض", "مكة", "دائرة",
    "الأحوال", "الشخصية", "القضية", "رقم", "المذكور", "أعلاه", "وعليه", "فقد", "اطلعت", "الأوراق",
];

const CUSTODY_JUDGMENT: &[&[&str]] = &[
    &["تخيير", "اختيار", "السابعة", "يختار"],
    &["الأم", "لوالدتهم", "أمومة", "الحاضنة"],
    &["الأب", "لوالدهم", "أبوة", "الولي"],
    &["تأجيل", "صلح", "شطب", "إحالة"],
];

const ANNULMENT_JUDGMENT: &[&[&str]] = &[
    &["عوض", "المهر", "تعويض", "بعوض"],
    &["ضرر", "هجر", "إعسار", "مجانا"],
    &["رفض", "مردودة", "صرف", "انتفاء"],
    &["تأجيل", "صلح", "شطب", "إحالة"],
];

const CUSTODY_EVIDENCE: &[&str] = &["حديث", "أحق", "مصلحة", "رعاية", "نفقة", "سكن", "تعليم", "صحة"];
const ANNULMENT_EVIDENCE: &[&str] = &["شقاق", "نشوز", "عنة", "عيب", "خلع", "إضرار", "مسكن", "كفاءة", "غيبة", "حبس", "إيذاء"];

impl SynthSpec {
    /// Built-in Arabic lexicons for `case_type`.
    pub fn builtin(case_type: CaseType, per_class: usize) -> SynthSpec {
        let (judgment, evidence) = match case_type {
            CaseType::Custody => (CUSTODY_JUDGMENT, CUSTODY_EVIDENCE),
            CaseType::Annulment => (ANNULMENT_JUDGMENT, ANNULMENT_EVIDENCE),
        };
        SynthSpec {
            case_type,
            per_class,
            lexicons: judgment.iter().map(|l| words(l)).collect(),
            evidence_lexicons: evidence.iter().map(|w| vec![w.to_string()]).collect(),
            filler: words(FILLER),
            pleading_words: (12, 24),
            pleading_keywords: (3, 3),
        }
    }

    fn validate(&self, catalogs: &CaseCatalogs) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::Synth(m));
        if self.per_class == 0 {
            return bad("per_class must be at least 1".into());
        }
        if catalogs.case_type() != self.case_type {
            return bad(format!("catalogs are for {}, spec is for {}", catalogs.case_type(), self.case_type));
        }
        if self.lexicons.len() != catalogs.judgment.len() {
            return bad(format!("{} judgment lexicons for {} classes", self.lexicons.len(), catalogs.judgment.len()));
        }
        if self.evidence_lexicons.len() != catalogs.evidence.len() {
            return bad(format!("{} evidence lexicons for {} classes", self.evidence_lexicons.len(), catalogs.evidence.len()));
        }
        if self.filler.is_empty() {
            return bad("filler vocabulary is empty".into());
        }
        if self.pleading_words.0 > self.pleading_words.1 {
            return bad("pleading_words range is inverted".into());
        }
        if self.pleading_keywords.0 == 0 || self.pleading_keywords.0 > self.pleading_keywords.1 {
            return bad("pleading_keywords range must be non-empty and start at 1 or more".into());
        }
        let mut seen: HashSet<&str> = HashSet::new();
        for (k, lex) in self.lexicons.iter().chain(&self.evidence_lexicons).enumerate() {
            if lex.is_empty() {
                return bad(format!("lexicon {k} is empty"));
            }
            for w in lex {
                if !seen.insert(w) {
                    return bad(format!("keyword {w:?} appears in more than one lexicon"));
                }
            }
        }
        if let Some(w) = self.filler.iter().find(|w| seen.contains(w.as_str())) {
            return bad(format!("filler word {w:?} is also a keyword"));
        }
        Ok(())
    }
}

fn pick<'a>(rng: &mut RngState, list: &'a [String]) -> &'a str {
    &list[rng.below(list.len())]
}

fn decoy_date(rng: &mut RngState) -> String {
    let d = 1 + rng.below(28);
    let m = 1 + rng.below(12);
    if rng.below(2) == 0 {
        format!("{d:02}/{m:02}/{}", 1430 + rng.below(15))
    } else {
        format!("{}-{m:02}-{d:02}", 2005 + rng.below(18))
    }
}

// fatha after the first letter
fn diacritize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => format!("{first}\u{064E}{}", chars.as_str()),
        None => String::new(),
    }
}

fn filler_text(rng: &mut RngState, spec: &SynthSpec, n: usize, inserts: Vec<String>) -> String {
    let mut out: Vec<String> = (0..n)
        .map(|_| {
            let w = pick(rng, &spec.filler);
            if rng.below(5) == 0 {
                diacritize(w)
            } else {
                w.to_owned()
            }
        })
        .collect();
    for w in inserts {
        let at = rng.below(out.len() + 1);
        out.insert(at, w);
    }
    out.join(" ")
}

/// Generates `per_class` cases for every judgment class, class-major order.
pub fn generate_synthetic(spec: &SynthSpec, catalogs: &CaseCatalogs, seed: u64) -> Result<CaseSet, CorpusError> {
    spec.validate(catalogs)?;
    let mut rng = RngState::new(seed);
    let n_evidence = spec.evidence_lexicons.len();
    let (lo, hi) = spec.pleading_words;
    let mut cases = Vec::with_capacity(spec.per_class * spec.lexicons.len());

    for (class, lexicon) in spec.lexicons.iter().enumerate() {
        for i in 0..spec.per_class {
            let evidence = (class * spec.per_class + i) % n_evidence;
            let n = lo + rng.below(hi - lo + 1);

            let (klo, khi) = spec.pleading_keywords;
            let n_keywords = klo + rng.below(khi - klo + 1);
            let mut pleading_inserts: Vec<String> = (0..n_keywords).map(|_| pick(&mut rng, lexicon).to_owned()).collect();
            pleading_inserts.push(pick(&mut rng, &spec.evidence_lexicons[evidence]).to_owned());
            pleading_inserts.push(format!("بتاريخ {}", decoy_date(&mut rng)));
            let pleading = filler_text(&mut rng, spec, n, pleading_inserts);

            let claim_inserts = vec![pick(&mut rng, lexicon).to_owned(), decoy_date(&mut rng)];
            let claim = filler_text(&mut rng, spec, n.div_ceil(2), claim_inserts);
            let answer_date = decoy_date(&mut rng);
            let answer = filler_text(&mut rng, spec, n.div_ceil(2), vec![answer_date]);

            cases.push(Case {
                id: format!("syn-{}-{class}-{i:03}", spec.case_type),
                case_type: spec.case_type,
                claim,
                answer,
                pleading,
                judgment: class,
                evidence,
                provenance: Some(Provenance::Synthetic),
            });
        }
    }
    Ok(CaseSet::new(catalogs.clone(), cases))
}

/// Word vectors for every lexicon and filler word of `spec`.
///
/// Keywords of a class sit near a shared random centroid of norm 4; filler
/// words are short isotropic noise vectors. Averaging a document's vectors
/// therefore leans toward its class centroid.
pub fn synthetic_embeddings(spec: &SynthSpec, dim: usize, seed: u64) -> EmbeddingStore {
    let mut rng = RngState::new(seed);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let scale = 1.0 / (dim as f64).sqrt();
    for lex in spec.lexicons.iter().chain(&spec.evidence_lexicons) {
        let mut centroid: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = crate::numkit::l2_norm(&centroid).max(1e-12);
        centroid.iter_mut().for_each(|v| *v *= 4.0 / norm);
        for w in lex {
            let v = centroid.iter().map(|c| c + 0.5 * scale * rng.normal()).collect();
            rows.push((w.clone(), v));
        }
    }
    for w in &spec.filler {
        let v = (0..dim).map(|_| 0.5 * scale * rng.normal()).collect();
        rows.push((w.clone(), v));
    }
    EmbeddingStore::from_rows(dim, rows).expect("synthetic rows share one dimension")
}
