/// Per-example output-gradient norms from each example's latest backward
/// pass. Grows on demand; unseen examples read as `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradNormCache {
    values: Vec<f64>,
    populated: Vec<bool>,
}

impl GradNormCache {
    pub fn new(examples: usize) -> Self {
        Self {
            values: vec![0.0; examples],
            populated: vec![false; examples],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, example: usize) -> Option<f64> {
        match self.populated.get(example) {
            Some(true) => Some(self.values[example]),
            _ => None,
        }
    }

    pub fn set(&mut self, example: usize, norm: f64) {
        debug_assert!(norm >= 0.0);
        if example >= self.values.len() {
            self.values.resize(example + 1, 0.0);
            self.populated.resize(example + 1, false);
        }
        self.values[example] = norm;
        self.populated[example] = true;
    }

    pub fn populated_count(&self) -> usize {
        self.populated.iter().filter(|&&p| p).count()
    }

    pub fn clear(&mut self) {
        self.populated.iter_mut().for_each(|p| *p = false);
    }
}
