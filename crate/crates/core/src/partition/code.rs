use std::fmt;

/// One node's state in an activation code. For trees `Off` is the left
/// branch, `On` the right branch and `Absent` pads paths that ended in a
/// leaf above the current depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Symbol {
    Off = 0,
    On = 1,
    Absent = 2,
}

impl Symbol {
    pub fn from_bit(on: bool) -> Self {
        if on {
            Symbol::On
        } else {
            Symbol::Off
        }
    }
}

/// Per-layer node states concatenated layer-major, unit-minor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ActivationCode {
    symbols: Vec<Symbol>,
    layer_sizes: Vec<usize>,
}

impl ActivationCode {
    pub fn from_layers<I, L>(layers: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: IntoIterator<Item = Symbol>,
    {
        let mut code = Self::default();
        for layer in layers {
            code.push_layer(layer);
        }
        code
    }

    pub fn push_layer(&mut self, layer: impl IntoIterator<Item = Symbol>) {
        let before = self.symbols.len();
        self.symbols.extend(layer);
        self.layer_sizes.push(self.symbols.len() - before);
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The code restricted to its first `layers` layers.
    pub fn truncated(&self, layers: usize) -> Self {
        let layers = layers.min(self.layer_sizes.len());
        let keep: usize = self.layer_sizes[..layers].iter().sum();
        Self {
            symbols: self.symbols[..keep].to_vec(),
            layer_sizes: self.layer_sizes[..layers].to_vec(),
        }
    }

    /// Two bits per symbol, two symbols per hex digit; an odd tail is
    /// padded with the unused value 3.
    pub fn to_hex(&self) -> String {
        const DIGITS: &[u8; 16] = b"0123456789abcdef";
        self.symbols
            .chunks(2)
            .map(|pair| {
                let hi = pair[0] as u8;
                let lo = pair.get(1).map_or(3, |&s| s as u8);
                DIGITS[usize::from(hi << 2 | lo)] as char
            })
            .collect()
    }
}

impl fmt::Display for ActivationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}
