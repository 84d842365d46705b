use super::{Gradients, Graph, Tensor, TensorError, Var};

/// Named parameter tensors in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a parameter and returns its slot index.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.position(name).map(move |i| &mut self.tensors[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Copies every parameter into `graph` as a leaf; the returned handles
    /// are in slot order.
    pub fn bind(&self, graph: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| graph.leaf(t)).collect()
    }

    /// Adds the gradients of `bound` leaves into the matching gradient slots.
    pub fn accumulate(&mut self, grads: &Gradients, bound: &[Var]) -> Result<(), TensorError> {
        for (tensor, &var) in self.tensors.iter_mut().zip(bound) {
            if let Some(g) = grads.get(var) {
                tensor.accumulate_grad(g)?;
            } else if tensor.is_tracked() && tensor.grad().is_none() {
                // Parameter not reached by this loss: contributes zero.
                tensor.accumulate_grad(&vec![0.0; tensor.len()])?;
            }
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for t in &mut self.tensors {
            t.clear_grad();
        }
    }

    /// Multiplies every accumulated gradient by `factor`.
    pub fn scale_grads(&mut self, factor: f64) {
        for t in &mut self.tensors {
            if let Some(g) = t.grad_mut() {
                g.iter_mut().for_each(|x| *x *= factor);
            }
        }
    }
}
