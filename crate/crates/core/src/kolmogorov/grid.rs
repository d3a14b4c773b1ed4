use crate::error::{Error, Result};
use crate::model::{theta_at, LatticeIndexing, Mode, Params};

/// Tensor grid of lattice forcing values and `v_j = j delta / p`,
/// `|j| <= N p`. Node numbers run with `eta` fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub params: Params,
    pub p: u32,
    pub lattice: LatticeIndexing,
}

impl Grid {
    pub fn new(params: Params, p: u32) -> Result<Self> {
        params.validate()?;
        if p == 0 {
            return Err(Error::InvalidParams("velocity refinement p must be at least 1".into()));
        }
        Ok(Self { params, p, lattice: params.lattice() })
    }

    /// `N p`, the largest velocity index.
    #[inline]
    pub fn jmax(&self) -> i32 {
        self.lattice.n * self.p as i32
    }

    /// Number of forcing values, which is also the half-bandwidth.
    #[inline]
    pub fn n_eta(&self) -> usize {
        self.lattice.len()
    }

    #[inline]
    pub fn n_v(&self) -> usize {
        (2 * self.jmax() + 1) as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_eta() * self.n_v()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dv(&self) -> f64 {
        self.params.delta / self.p as f64
    }

    #[inline]
    pub fn node(&self, i: i32, j: i32) -> usize {
        debug_assert!(i.abs() <= self.lattice.n && j.abs() <= self.jmax());
        (j + self.jmax()) as usize * self.n_eta() + (i + self.lattice.n) as usize
    }

    /// `(i, j)` of a node.
    #[inline]
    pub fn coords(&self, node: usize) -> (i32, i32) {
        let ne = self.n_eta();
        ((node % ne) as i32 - self.lattice.n, (node / ne) as i32 - self.jmax())
    }

    #[inline]
    pub fn eta(&self, i: i32) -> f64 {
        self.params.eta(i)
    }

    #[inline]
    pub fn v(&self, j: i32) -> f64 {
        j as f64 * self.dv()
    }

    #[inline]
    pub fn mode(&self, i: i32, j: i32) -> Mode {
        theta_at(i, j as f64, &self.lattice)
    }

    #[inline]
    pub fn is_static(&self, node: usize) -> bool {
        let (i, j) = self.coords(node);
        j == 0 && self.lattice.in_static_band(i)
    }

    /// Nodes of the static set, ordered by forcing index.
    pub fn static_nodes(&self) -> Vec<usize> {
        let k = self.lattice.k_mu_s;
        (-k..=k).map(|i| self.node(i, 0)).collect()
    }

    /// Node of the exit point `s+`.
    pub fn s_plus(&self) -> usize {
        self.node(self.lattice.k_mu_s + 1, 0)
    }

    pub fn s_minus(&self) -> usize {
        self.node(-self.lattice.k_mu_s - 1, 0)
    }

    /// Image of a node under `(eta, v) -> (-eta, -v)`.
    #[inline]
    pub fn reflect(&self, node: usize) -> usize {
        let (i, j) = self.coords(node);
        self.node(-i, -j)
    }

    /// Samples `f(eta, mode, v)` at every node.
    pub fn node_function(&self, f: impl Fn(f64, Mode, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|r| {
                let (i, j) = self.coords(r);
                f(self.eta(i), self.mode(i, j), self.v(j))
            })
            .collect()
    }

    /// Values of a fine-grid function at the nodes of `coarse`, whose
    /// velocity spacing must be a multiple of this grid's.
    pub fn restrict(&self, values: &[f64], coarse: &Grid) -> Result<Vec<f64>> {
        if coarse.params.delta != self.params.delta || coarse.lattice.n != self.lattice.n || self.p % coarse.p != 0 {
            return Err(Error::Domain(format!(
                "grid with p = {} does not refine p = {}",
                self.p, coarse.p
            )));
        }
        let ratio = (self.p / coarse.p) as i32;
        Ok((0..coarse.len())
            .map(|r| {
                let (i, j) = coarse.coords(r);
                values[self.node(i, j * ratio)]
            })
            .collect())
    }

    /// `sum_r pi_r g_r`.
    pub fn pair(pi: &[f64], g: &[f64]) -> f64 {
        pi.iter().zip(g).map(|(a, b)| a * b).sum()
    }
}
