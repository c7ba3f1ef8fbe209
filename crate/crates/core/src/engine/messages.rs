use std::sync::Arc;

use crossbeam_channel::Sender;
use serde::{Deserialize, Serialize};

use super::blocks::SampledEdges;
use super::exclusion::ExclusionSet;
use crate::gconstruct::FeatureMatrix;
use crate::schema::Fanout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchRequest {
    pub req_id: u64,
    pub node_type: usize,
    pub ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchResponse {
    pub req_id: u64,
    pub rows: Result<FeatureMatrix, String>,
}

#[derive(Debug, Clone)]
pub struct SampleRequest {
    pub req_id: u64,
    pub relation: usize,
    pub dst: Vec<u64>,
    pub fanout: Fanout,
    pub batch_seed: u64,
    pub layer: usize,
    pub exclusion: Arc<ExclusionSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResponse {
    pub req_id: u64,
    pub edges: Result<SampledEdges, String>,
}

/// What a partition server accepts.
#[derive(Debug)]
pub enum Request {
    Fetch(FetchRequest, Sender<FetchResponse>),
    Sample(SampleRequest, Sender<SampleResponse>),
    Shutdown,
}
