//! CSV exports: propagation statistics, embedding dumps and training logs.

use std::io::Write;

use mglc_core::autodiff::Tensor;
use mglc_core::context::{ContextGraph, PropagationStats};

use crate::error::{Error, Result};
use crate::experiment::LogRow;

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

/// `node_kind,node_id,degree,out_propagation_weight`, one row per node.
/// Node ids are dataset / dictionary indices; weights have 9 decimals.
pub fn write_stats<W: Write>(out: W, g: &ContextGraph, stats: &PropagationStats) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_kind", "node_id", "degree", "out_propagation_weight"]).map_err(csv_err)?;
    for s in &stats.nodes {
        w.write_record([
            s.node.kind.name().to_string(),
            g.source(s.node).to_string(),
            s.degree.to_string(),
            format!("{:.9}", s.out_weight),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

/// One named block of embedding rows: `rows[i]` belongs to context node
/// `nodes[i]`.
pub struct EmbeddingLayer<'a> {
    pub layer: String,
    pub nodes: Vec<usize>,
    pub values: &'a Tensor,
}

/// `node_kind,node_id,layer,x0,x1,...` for every row of every layer.
pub fn write_embeddings<W: Write>(out: W, g: &ContextGraph, layers: &[EmbeddingLayer<'_>]) -> Result<()> {
    let dim = layers.first().map_or(0, |l| l.values.cols());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node_kind".to_string(), "node_id".to_string(), "layer".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for l in layers {
        for (r, &node) in l.nodes.iter().enumerate() {
            let n = g.node(node);
            let mut row = vec![n.kind.name().to_string(), g.source(n).to_string(), l.layer.clone()];
            row.extend(l.values.row(r).iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

/// `episode,loss,wall_ms`.
pub fn write_train_log<W: Write>(out: W, log: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "loss", "wall_ms"]).map_err(csv_err)?;
    for r in log {
        w.write_record([r.episode.to_string(), r.loss.to_string(), r.wall_ms.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mglc_core::context::{propagation_stats, ContextEdge, EdgeLabel, WeightScheme};

    fn path_graph() -> ContextGraph {
        // molecules 0 (support) and 1 (query), properties 0 (target) and 1
        let e = |a, b, label| ContextEdge { a, b, label };
        ContextGraph::from_edges(
            vec![7, 9],
            1,
            vec![0, 1],
            vec![],
            vec![e(0, 2, EdgeLabel::Active), e(0, 3, EdgeLabel::Unknown), e(1, 3, EdgeLabel::Inactive)],
        )
        .unwrap()
    }

    #[test]
    fn stats_csv_has_nine_decimals() {
        let g = path_graph();
        let stats = propagation_stats(&g, WeightScheme::Symmetric).unwrap();
        let mut buf = Vec::new();
        write_stats(&mut buf, &g, &stats).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "node_kind,node_id,degree,out_propagation_weight");
        // support molecule: 1/sqrt(2*1) + 1/sqrt(2*2)
        assert_eq!(lines[1], "molecule,7,2,1.207106781");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn embeddings_and_log() {
        let g = path_graph();
        let t = Tensor::new(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &g, &[EmbeddingLayer { layer: "h1".into(), nodes: vec![1, 2], values: &t }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node_kind,node_id,layer,x0,x1\nmolecule,9,h1,0.5,-1\nproperty,0,h1,2,0.25\n");
        let mut buf = Vec::new();
        write_train_log(&mut buf, &[LogRow { episode: 0, loss: 0.5, wall_ms: 3 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "episode,loss,wall_ms\n0,0.5,3\n");
    }
}
