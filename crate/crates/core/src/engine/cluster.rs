use std::cell::Cell;
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{bounded, unbounded, Sender};

use super::blocks::{sample_local, GraphAccess, SampledEdges};
use super::exclusion::ExclusionSet;
use super::messages::{FetchRequest, FetchResponse, Request, SampleRequest, SampleResponse};
use crate::error::{Error, Result};
use crate::gconstruct::FeatureMatrix;
use crate::partition::{GraphMeta, Partition};
use crate::schema::Fanout;

/// One server thread per partition answering fetch and sample requests.
/// Dropping the cluster shuts the servers down.
#[derive(Debug)]
pub struct Cluster {
    parts: Vec<Arc<Partition>>,
    servers: Vec<Sender<Request>>,
    handles: Vec<JoinHandle<()>>,
}

fn serve(part: Arc<Partition>, inbox: crossbeam_channel::Receiver<Request>) {
    for req in inbox {
        match req {
            Request::Fetch(r, reply) => {
                let rows = part.local_inputs(r.node_type, &r.ids).map_err(|e| e.to_string());
                let _ = reply.send(FetchResponse { req_id: r.req_id, rows });
            }
            Request::Sample(r, reply) => {
                let edges = sample_local(&part, r.relation, &r.dst, r.fanout, r.batch_seed, r.layer, &r.exclusion).map_err(|e| e.to_string());
                let _ = reply.send(SampleResponse { req_id: r.req_id, edges });
            }
            Request::Shutdown => break,
        }
    }
}

impl Cluster {
    pub fn start(parts: Vec<Arc<Partition>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("a cluster needs at least one partition"));
        }
        for (i, p) in parts.iter().enumerate() {
            if p.part_id != i || p.num_parts() != parts.len() {
                return Err(Error::invalid(format!("partition list out of order at {i}")));
            }
        }
        let mut servers = Vec::new();
        let mut handles = Vec::new();
        for part in &parts {
            let (tx, rx) = unbounded();
            let part = part.clone();
            let handle = std::thread::Builder::new()
                .name(format!("part-server-{}", part.part_id))
                .spawn(move || serve(part, rx))
                .map_err(|e| Error::Worker(format!("cannot spawn partition server: {e}")))?;
            servers.push(tx);
            handles.push(handle);
        }
        Ok(Self { parts, servers, handles })
    }

    pub fn num_workers(&self) -> usize {
        self.parts.len()
    }

    pub fn meta(&self) -> &Arc<GraphMeta> {
        &self.parts[0].meta
    }

    pub fn partition(&self, worker_id: usize) -> &Arc<Partition> {
        &self.parts[worker_id]
    }

    /// Context for the trainer that owns partition `worker_id`.
    pub fn worker(&self, worker_id: usize) -> WorkerContext {
        WorkerContext {
            worker_id,
            part: self.parts[worker_id].clone(),
            peers: self.servers.clone(),
            next_req: Cell::new(0),
            stats: MessageStats::default(),
        }
    }
}

impl Drop for Cluster {
    fn drop(&mut self) {
        for s in &self.servers {
            let _ = s.send(Request::Shutdown);
        }
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

/// Remote requests a worker has sent.
#[derive(Debug, Default)]
pub struct MessageStats {
    pub fetch_requests: Cell<u64>,
    pub sample_requests: Cell<u64>,
}

/// A trainer's view of the cluster: its own partition read directly, every
/// other partition reached through messages.
#[derive(Debug)]
pub struct WorkerContext {
    pub worker_id: usize,
    part: Arc<Partition>,
    peers: Vec<Sender<Request>>,
    next_req: Cell<u64>,
    pub stats: MessageStats,
}

/// Positions of `ids` grouped by owner partition.
fn group_by_owner(part: &Partition, node_type: usize, ids: &[u64]) -> Result<Vec<Vec<usize>>> {
    let mut groups = vec![Vec::new(); part.num_parts()];
    for (i, &g) in ids.iter().enumerate() {
        let owner = part.owner(node_type, g).ok_or_else(|| {
            Error::invalid(format!(
                "unknown {} node id {g} (count {})",
                part.meta.node_types[node_type].name, part.meta.node_types[node_type].count
            ))
        })?;
        groups[owner].push(i);
    }
    Ok(groups)
}

impl WorkerContext {
    pub fn partition(&self) -> &Arc<Partition> {
        &self.part
    }

    fn req_id(&self) -> u64 {
        let id = self.next_req.get();
        self.next_req.set(id + 1);
        id
    }

    pub fn message_count(&self) -> u64 {
        self.stats.fetch_requests.get() + self.stats.sample_requests.get()
    }

    fn disconnected(&self, peer: usize) -> Error {
        Error::Worker(format!("worker {}: partition server {peer} is gone", self.worker_id))
    }
}

impl GraphAccess for WorkerContext {
    fn meta(&self) -> &GraphMeta {
        &self.part.meta
    }

    /// Local ids come from local storage; remote ids go out as one request
    /// per owner. Rows come back in input order.
    fn fetch_features(&self, node_type: usize, ids: &[u64]) -> Result<FeatureMatrix> {
        let groups = group_by_owner(&self.part, node_type, ids)?;
        let cols = self.part.meta.node_types[node_type].input_dim();
        let mut out = FeatureMatrix::zeros(ids.len(), cols);
        let mut pending = Vec::new();
        for (owner, positions) in groups.iter().enumerate() {
            if positions.is_empty() {
                continue;
            }
            let wanted: Vec<u64> = positions.iter().map(|&i| ids[i]).collect();
            if owner == self.part.part_id {
                let rows = self.part.local_inputs(node_type, &wanted)?;
                scatter_rows(&mut out, positions, &rows);
            } else {
                let (tx, rx) = bounded(1);
                let req = FetchRequest {
                    req_id: self.req_id(),
                    node_type,
                    ids: wanted,
                };
                self.stats.fetch_requests.set(self.stats.fetch_requests.get() + 1);
                self.peers[owner]
                    .send(Request::Fetch(req, tx))
                    .map_err(|_| self.disconnected(owner))?;
                pending.push((owner, rx));
            }
        }
        for (owner, rx) in pending {
            let resp = rx.recv().map_err(|_| self.disconnected(owner))?;
            let rows = resp.rows.map_err(Error::Worker)?;
            if rows.rows != groups[owner].len() || rows.cols != cols {
                return Err(Error::Worker(format!("partition {owner} answered with a {}x{} matrix", rows.rows, rows.cols)));
            }
            scatter_rows(&mut out, &groups[owner], &rows);
        }
        Ok(out)
    }

    fn sample(&self, rel: usize, dst: &[u64], fanout: Fanout, batch_seed: u64, layer: usize, exclusion: &Arc<ExclusionSet>) -> Result<SampledEdges> {
        let dst_type = self.part.meta.relations[rel].dst_type;
        let groups = group_by_owner(&self.part, dst_type, dst)?;
        let mut parts: Vec<Option<SampledEdges>> = vec![None; groups.len()];
        let mut pending = Vec::new();
        for (owner, positions) in groups.iter().enumerate() {
            if positions.is_empty() {
                continue;
            }
            let wanted: Vec<u64> = positions.iter().map(|&i| dst[i]).collect();
            if owner == self.part.part_id {
                parts[owner] = Some(sample_local(&self.part, rel, &wanted, fanout, batch_seed, layer, exclusion)?);
            } else {
                let (tx, rx) = bounded(1);
                let req = SampleRequest {
                    req_id: self.req_id(),
                    relation: rel,
                    dst: wanted,
                    fanout,
                    batch_seed,
                    layer,
                    exclusion: exclusion.clone(),
                };
                self.stats.sample_requests.set(self.stats.sample_requests.get() + 1);
                self.peers[owner]
                    .send(Request::Sample(req, tx))
                    .map_err(|_| self.disconnected(owner))?;
                pending.push((owner, rx));
            }
        }
        for (owner, rx) in pending {
            let resp = rx.recv().map_err(|_| self.disconnected(owner))?;
            parts[owner] = Some(resp.edges.map_err(Error::Worker)?);
        }
        // Stitch back into input order.
        let mut slot = vec![(0usize, 0usize); dst.len()];
        for (owner, positions) in groups.iter().enumerate() {
            for (k, &i) in positions.iter().enumerate() {
                slot[i] = (owner, k);
            }
        }
        let mut out = SampledEdges::empty();
        for &(owner, k) in &slot {
            out.append(parts[owner].as_ref().expect("every owner answered"), k);
        }
        Ok(out)
    }
}

fn scatter_rows(out: &mut FeatureMatrix, positions: &[usize], rows: &FeatureMatrix) {
    let c = out.cols;
    for (k, &i) in positions.iter().enumerate() {
        out.data[i * c..(i + 1) * c].copy_from_slice(rows.row(k));
    }
}
