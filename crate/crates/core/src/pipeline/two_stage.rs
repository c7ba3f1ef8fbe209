use std::sync::Arc;

use super::train::{train, TrainHooks, TrainOutput};
use crate::error::{Error, Result};
use crate::model::{embed_name, InitOptions, ModelSpec, ModelState, OptimizerState};
use crate::partition::Partition;
use crate::schema::{FeaturelessMode, OneOrMany, Task, TrainConfig};

#[derive(Debug, Clone)]
pub struct TwoStageOutput {
    /// Link prediction run that learned the embedding tables.
    pub stage1: TrainOutput,
    /// Downstream run over the frozen tables.
    pub stage2: TrainOutput,
}

/// Stage one learns embedding tables of featureless types with link
/// prediction; stage two copies them into the downstream model, freezes
/// them and trains the task in `config`.
pub fn two_stage_featureless(parts: &[Arc<Partition>], config: &TrainConfig) -> Result<TwoStageOutput> {
    let meta = &parts.first().ok_or_else(|| Error::invalid("no partitions"))?.meta;
    if !meta.node_types.iter().any(|n| n.is_featureless()) {
        return Err(Error::invalid("two-stage training needs at least one featureless node type"));
    }
    let ts = config.two_stage.as_ref().ok_or_else(|| Error::validation("$.two_stage", "required for two-stage training"))?;
    let mut c1 = config.clone();
    c1.task = Task::LinkPrediction;
    c1.target_etype = Some(OneOrMany::Many(ts.lp_etype.to_vec()));
    c1.num_epochs = ts.num_epochs;
    c1.learning_rate = ts.learning_rate.unwrap_or(config.learning_rate);
    c1.featureless = FeaturelessMode::Embedding;
    c1.validate()?;
    let stage1 = train(parts, &c1, None, &TrainHooks::default())?;

    let mut c2 = config.clone();
    c2.featureless = FeaturelessMode::Embedding;
    let spec = ModelSpec::from_meta(meta, &c2)?;
    let mut model = ModelState::init(spec, InitOptions::from_config(&c2), OptimizerState::new(c2.optimizer, c2.learning_rate));
    freeze_embeddings(&mut model, Some(&stage1.model))?;
    let stage2 = train(parts, &c2, Some(model), &TrainHooks::default())?;
    Ok(TwoStageOutput { stage1, stage2 })
}

/// Freezes every embedding table of `model`, first copying the values
/// from `source` when given.
pub fn freeze_embeddings(model: &mut ModelState, source: Option<&ModelState>) -> Result<()> {
    let names: Vec<String> = model
        .spec
        .node_types
        .iter()
        .filter(|n| n.embedding_rows.is_some())
        .map(|n| embed_name(&n.name))
        .collect();
    for name in names {
        let p = model.params.get_mut(&name)?;
        if let Some(src) = source {
            let s = src.params.get(&name)?;
            if (s.rows, s.cols) != (p.rows, p.cols) {
                return Err(Error::Checkpoint(format!(
                    "`{name}` is {}x{} in stage one but {}x{} here",
                    s.rows, s.cols, p.rows, p.cols
                )));
            }
            p.data.clone_from(&s.data);
        }
        p.frozen = true;
    }
    Ok(())
}
