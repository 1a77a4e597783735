/// Enumeration and solver caps.
///
/// Most routines fall back to exhaustive enumeration, which is only sensible
/// for small instances. Every such loop checks one of these caps and fails
/// with `ScaleExceeded` instead of running away.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Largest ground set for one-off enumeration of all subsets.
    pub subset_elements: usize,
    /// Largest ground set for subset enumeration repeated inside the engine loop.
    pub engine_subset_elements: usize,
    /// Largest number of enumerated paths.
    pub paths: usize,
    /// Largest number of enumerated minimal transversals.
    pub transversals: usize,
    /// Largest number of search nodes when looking for special cycles.
    pub cycle_search: usize,
    pub lp_variables: usize,
    pub lp_constraints: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            subset_elements: 20,
            engine_subset_elements: 12,
            paths: 100_000,
            transversals: 10_000,
            cycle_search: 1_000_000,
            lp_variables: 4096,
            lp_constraints: 16_384,
        }
    }
}

impl Limits {
    /// Caps subset enumeration at `elements` ground elements, both for
    /// one-off queries and inside the engine loop.
    pub fn with_subset_cap(mut self, elements: usize) -> Self {
        self.subset_elements = elements;
        self.engine_subset_elements = elements;
        self
    }
}
