use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use morphforge_core::protocol::{Role, Split};
use morphforge_core::vuln::{
    fmr_threshold, imposter_scores, score_morphs, vulnerability_report, AttackScores,
    DownsampledPixels, MorphSample, Probe, RecognitionBackend, ScoreTable, Threshold,
};
use morphforge_core::{Error, Result};
use serde::Serialize;

use super::{external_backend, load_indices, load_morph, Dataset};
use crate::args::{BackendKind, VulnArgs};
use crate::provenance::Recorder;

#[derive(Serialize)]
struct ThresholdRecord {
    backend: String,
    imposter_comparisons: usize,
    #[serde(flatten)]
    threshold: Threshold,
}

pub(super) fn run(a: &VulnArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let data = Dataset::load(rec, &a.manifest, &a.pairs)?;
    let backend: Box<dyn RecognitionBackend> = match a.backend.backend {
        BackendKind::Toy => Box::new(DownsampledPixels { grid: a.grid }),
        BackendKind::External => Box::new(external_backend(&a.backend, 0)?),
    };
    let name = backend.name().to_string();

    let splits: Vec<Split> = [Split::Train, Split::Test]
        .into_iter()
        .filter(|s| a.split.includes(*s))
        .collect();
    let members: BTreeSet<&str> = splits
        .iter()
        .flat_map(|s| data.protocol.identities(*s).iter().map(String::as_str))
        .collect();
    let sources: BTreeSet<&str> = splits
        .iter()
        .flat_map(|s| data.protocol.morph_sources(*s))
        .collect();

    // Probes: probe-role captures of the evaluated identities that fed no morph.
    // Imposters: every cross-identity comparison among those identities' images.
    let mut probes = Vec::new();
    let mut gallery = Vec::new();
    for identity in data
        .manifest
        .identities
        .iter()
        .filter(|i| members.contains(i.id.as_str()))
    {
        for record in &identity.images {
            let probe = Probe {
                id: record.id.clone(),
                subject: identity.id.clone(),
                image: data.image(rec, &record.id)?,
            };
            if record.role == Role::Probe && !sources.contains(record.id.as_str()) {
                probes.push(probe.clone());
            }
            gallery.push(probe);
        }
    }
    let imposters = imposter_scores(&gallery, backend.as_ref())?;
    let threshold = fmr_threshold(&imposters, a.target_fmr)?;
    rec.write_json(
        &a.out.join(format!("threshold_{name}.json")),
        &ThresholdRecord {
            backend: name.clone(),
            imposter_comparisons: imposters.len(),
            threshold,
        },
    )?;

    let mut tables: Vec<(String, ScoreTable)> = Vec::new();
    for (dir, index) in a.morphs.iter().zip(load_indices(rec, &a.morphs)?) {
        let mut morphs = Vec::new();
        for entry in index.morphs.iter().filter(|m| a.split.includes(m.split)) {
            morphs.push(MorphSample {
                id: entry.id.clone(),
                image: load_morph(rec, dir, entry)?,
                subjects: [entry.a_id.clone(), entry.b_id.clone()],
                sources: [entry.a_img.clone(), entry.b_img.clone()],
            });
        }
        if morphs.is_empty() {
            return Err(Error::EmptyInput("morphs in the evaluated split"));
        }
        let table = score_morphs(&morphs, &probes, backend.as_ref())?;
        rec.write(
            &a.out.join(format!("scores_{}_{name}.csv", index.attack)),
            &table.to_csv()?,
        )?;
        tables.push((index.attack, table));
    }

    let cells: Vec<AttackScores<'_>> = tables
        .iter()
        .map(|(attack, table)| AttackScores {
            attack,
            backend: &name,
            table,
        })
        .collect();
    let thresholds = HashMap::from([(name.clone(), threshold)]);
    for report in vulnerability_report(&cells, &thresholds, a.aggregation.into(), a.seed)? {
        rec.write_json(
            &a.out.join(format!("vuln_{}_{name}.json", report.attack)),
            &report,
        )?;
    }
    Ok(a.out.clone())
}
