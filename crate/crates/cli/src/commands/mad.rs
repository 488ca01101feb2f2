use std::path::{Path, PathBuf};

use morphforge_core::mad::{
    cross_set_evaluate, scores_to_csv, train_mad, MadReport, ScoreEntry, TestSet, LBP_NEIGHBORS,
};
use morphforge_core::protocol::{BonafidePolicy, Split};
use morphforge_core::{Error, FaceImage, FeatureConfig, MadModel, Result};

use super::{check_label, load_index, load_indices, load_morph, parent_dir, Dataset};
use crate::args::{MadEvalArgs, MadTrainArgs};
use crate::index::MorphIndex;
use crate::provenance::Recorder;

fn policy(include_sources: bool) -> BonafidePolicy {
    if include_sources {
        BonafidePolicy::All
    } else {
        BonafidePolicy::ExcludeMorphSources
    }
}

fn attacks(
    rec: &mut Recorder,
    dir: &Path,
    index: &MorphIndex,
    split: Split,
) -> Result<Vec<(String, FaceImage)>> {
    let out = index
        .in_split(split)
        .map(|e| Ok((e.id.clone(), load_morph(rec, dir, e)?)))
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::EmptyInput("morphs in the split"));
    }
    Ok(out)
}

fn bonafide(
    rec: &mut Recorder,
    data: &Dataset,
    split: Split,
    policy: BonafidePolicy,
) -> Result<Vec<(String, FaceImage)>> {
    data.protocol
        .bonafide_images(&data.manifest, split, policy)
        .iter()
        .map(|(_, im)| Ok((im.id.clone(), data.image(rec, &im.id)?)))
        .collect()
}

pub(super) fn train(a: &MadTrainArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let config = FeatureConfig {
        color_spaces: a.colors.clone(),
        pyramid_levels: a.levels,
        lbp_radii: a.radii.clone(),
        lbp_neighbors: LBP_NEIGHBORS,
    };
    config.validate()?;
    let data = Dataset::load(rec, &a.manifest, &a.pairs)?;
    let index = load_index(rec, &a.morphs)?;
    let attack: Vec<FaceImage> = attacks(rec, &a.morphs, &index, Split::Train)?
        .into_iter()
        .map(|(_, im)| im)
        .collect();
    let bona: Vec<FaceImage> = bonafide(rec, &data, Split::Train, policy(a.include_morph_sources))?
        .into_iter()
        .map(|(_, im)| im)
        .collect();
    let model = train_mad(&attack, &bona, &config)?;
    rec.write(&a.out, &model.to_json()?)?;
    Ok(parent_dir(&a.out))
}

pub(super) fn eval(a: &MadEvalArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let mut models: Vec<(String, MadModel)> = Vec::new();
    for spec in &a.model {
        let (label, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--model `{spec}` is not label=path")))?;
        check_label(label)?;
        if models.iter().any(|(l, _)| l == label) {
            return Err(Error::Validation(format!(
                "model label `{label}` given twice"
            )));
        }
        models.push((
            label.to_string(),
            MadModel::from_json(&rec.read(Path::new(path))?)?,
        ));
    }
    let data = Dataset::load(rec, &a.manifest, &a.pairs)?;
    let mut sets = Vec::new();
    for (dir, index) in a.morphs.iter().zip(load_indices(rec, &a.morphs)?) {
        sets.push((
            index.attack.clone(),
            attacks(rec, dir, &index, Split::Test)?,
        ));
    }
    let bona = bonafide(rec, &data, Split::Test, policy(a.include_morph_sources))?;
    if bona.is_empty() {
        return Err(Error::EmptyInput("bona fide test images"));
    }

    let bona_images: Vec<FaceImage> = bona.iter().map(|(_, im)| im.clone()).collect();
    let attack_images: Vec<Vec<FaceImage>> = sets
        .iter()
        .map(|(_, s)| s.iter().map(|(_, im)| im.clone()).collect())
        .collect();
    let tests: Vec<TestSet<'_>> = sets
        .iter()
        .zip(&attack_images)
        .map(|((attack, _), images)| TestSet {
            attack,
            attacks: images,
            bonafide: &bona_images,
        })
        .collect();
    let model_refs: Vec<(&str, &MadModel)> = models.iter().map(|(l, m)| (l.as_str(), m)).collect();

    for cell in cross_set_evaluate(&model_refs, &tests)? {
        let stem = format!("{}_on_{}", cell.trained_on, cell.tested_on);
        let set = &sets
            .iter()
            .find(|(attack, _)| *attack == cell.tested_on)
            .expect("cell names a test set")
            .1;
        let report = MadReport::new(
            &cell.trained_on,
            &cell.tested_on,
            (set.len(), bona.len()),
            cell.report,
            a.seed,
        );
        report.validate()?;
        rec.write_json(&a.out.join(format!("mad_{stem}.json")), &report)?;
        let entries: Vec<ScoreEntry> = set
            .iter()
            .zip(&cell.attack_scores)
            .map(|((id, _), &score)| ScoreEntry {
                image_id: id.clone(),
                label: 1,
                score,
            })
            .chain(
                bona.iter()
                    .zip(&cell.bonafide_scores)
                    .map(|((id, _), &score)| ScoreEntry {
                        image_id: id.clone(),
                        label: 0,
                        score,
                    }),
            )
            .collect();
        rec.write(
            &a.out.join(format!("mad_scores_{stem}.csv")),
            &scores_to_csv(&entries)?,
        )?;
    }
    Ok(a.out.clone())
}
