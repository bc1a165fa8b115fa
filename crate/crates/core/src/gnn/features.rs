use std::sync::Arc;

use difftape::Tensor;

use crate::body::Body;
use crate::error::Result;
use crate::forces;
use crate::geom::{self, Vec3};
use crate::mesh::normals_from_faces;
use crate::rest::{MaterialParams, RestState};

pub const NODE_WIDTH: usize = 11;
pub const EDGE_WIDTH: usize = 8;

/// Graph inputs of the network.
///
/// Node columns: normal (3), signed body distance (1), internal force (3),
/// then `mu`, `lambda`, `k_bend` and the vertex mass. Edge columns: current
/// edge vector (3), its length, rest edge vector (3), rest length. Edge
/// `k` points from `senders[k]` into `receivers[k]`, and its vectors are
/// `x_receiver − x_sender`.
#[derive(Debug, Clone)]
pub struct GraphFeatures {
    pub node: Tensor,
    pub edge: Tensor,
    pub receivers: Arc<Vec<usize>>,
    pub senders: Arc<Vec<usize>>,
    pub positions: Vec<Vec3>,
}

impl GraphFeatures {
    pub fn num_nodes(&self) -> usize {
        self.node.nrows()
    }

    pub fn num_edges(&self) -> usize {
        self.edge.nrows()
    }

    /// Same graph with vertex `v` renamed to `perm[v]`. Edge order is kept.
    pub fn permuted(&self, perm: &[usize]) -> GraphFeatures {
        let n = self.num_nodes();
        let mut node = Tensor::zeros((n, NODE_WIDTH));
        let mut positions = vec![[0.0; 3]; n];
        for v in 0..n {
            node.row_mut(perm[v]).assign(&self.node.row(v));
            positions[perm[v]] = self.positions[v];
        }
        GraphFeatures {
            node,
            edge: self.edge.clone(),
            receivers: Arc::new(self.receivers.iter().map(|&r| perm[r]).collect()),
            senders: Arc::new(self.senders.iter().map(|&s| perm[s]).collect()),
            positions,
        }
    }
}

pub fn build_features(x: &[Vec3], rest: &RestState, mat: &MaterialParams, body: &Body) -> Result<GraphFeatures> {
    let normals = normals_from_faces(&rest.faces, x);
    let queries = body.batch_query(x);
    let f_int = forces::internal_force(x, rest, mat)?;
    let n = x.len();
    let mut node = Tensor::zeros((n, NODE_WIDTH));
    for v in 0..n {
        let row = [
            normals[v][0],
            normals[v][1],
            normals[v][2],
            queries[v].d,
            f_int[v][0],
            f_int[v][1],
            f_int[v][2],
            mat.mu,
            mat.lambda,
            mat.k_bend,
            forces::vertex_mass(rest, mat, v),
        ];
        for (c, val) in row.into_iter().enumerate() {
            node[(v, c)] = val;
        }
    }
    let ne = rest.directed_edges.len();
    let mut edge = Tensor::zeros((ne, EDGE_WIDTH));
    for (k, &[r, s]) in rest.directed_edges.iter().enumerate() {
        let cur = geom::sub(x[r], x[s]);
        let row = [
            cur[0],
            cur[1],
            cur[2],
            geom::norm(cur),
            rest.edge_rest_vector[k][0],
            rest.edge_rest_vector[k][1],
            rest.edge_rest_vector[k][2],
            rest.edge_rest_length[k],
        ];
        for (c, val) in row.into_iter().enumerate() {
            edge[(k, c)] = val;
        }
    }
    Ok(GraphFeatures {
        node,
        edge,
        receivers: Arc::new(rest.directed_edges.iter().map(|e| e[0]).collect()),
        senders: Arc::new(rest.directed_edges.iter().map(|e| e[1]).collect()),
        positions: x.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_square_cloth;
    use crate::rest::build_rest_state;

    #[test]
    fn rest_cloth_above_body() {
        let m = make_square_cloth(5, 1.0).unwrap();
        let mat = MaterialParams { gravity: [0.0; 3], ..Default::default() };
        let rest = build_rest_state(&m, &mat).unwrap();
        let body = Body::sphere([0.0, -2.0, 0.0], 0.5).unwrap();
        let g = build_features(&m.vertices, &rest, &mat, &body).unwrap();
        assert_eq!(g.node.ncols(), NODE_WIDTH);
        assert_eq!(g.edge.ncols(), EDGE_WIDTH);
        for v in 0..g.num_nodes() {
            for c in 4..7 {
                assert!(g.node[(v, c)].abs() < 1e-12);
            }
            assert!(g.node[(v, 3)] > 0.0);
            assert_eq!(g.node[(v, 7)], mat.mu);
            assert_eq!(g.node[(v, 8)], mat.lambda);
            assert_eq!(g.node[(v, 9)], mat.k_bend);
        }
    }

    #[test]
    fn edges_come_in_mirrored_pairs() {
        let m = make_square_cloth(4, 1.0).unwrap();
        let mat = MaterialParams::default();
        let rest = build_rest_state(&m, &mat).unwrap();
        let body = Body::sphere([0.0, -2.0, 0.0], 0.5).unwrap();
        let x: Vec<Vec3> = m.vertices.iter().map(|p| [p[0], 0.1 * p[0] * p[2], p[2]]).collect();
        let g = build_features(&x, &rest, &mat, &body).unwrap();
        assert_eq!(g.num_edges(), 2 * m.edges().len());
        for k in (0..g.num_edges()).step_by(2) {
            assert_eq!(g.receivers[k], g.senders[k + 1]);
            assert_eq!(g.senders[k], g.receivers[k + 1]);
            for c in [0, 1, 2, 4, 5, 6] {
                assert_eq!(g.edge[(k, c)], -g.edge[(k + 1, c)]);
            }
            assert_eq!(g.edge[(k, 3)], g.edge[(k + 1, 3)]);
            assert_eq!(g.edge[(k, 7)], g.edge[(k + 1, 7)]);
        }
    }

    #[test]
    fn rest_embedding_lengths_match() {
        let m = crate::mesh::make_tube_garment(0.2, 0.3, 9, 4).unwrap();
        let mat = MaterialParams::default();
        let rest = build_rest_state(&m, &mat).unwrap();
        let body = Body::sphere([0.0, 0.0, 0.0], 0.1).unwrap();
        let g = build_features(&m.vertices, &rest, &mat, &body).unwrap();
        for k in 0..g.num_edges() {
            assert!((g.edge[(k, 3)] - g.edge[(k, 7)]).abs() < 1e-10);
        }
    }
}
