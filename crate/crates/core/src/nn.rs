//! Layer helpers shared by the networks.

use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::ops::ConvSpec;
use crate::real::Real;
use crate::tape::Tape;

/// Convolution with `{prefix}.weight` / `{prefix}.bias`; channel errors
/// name the layer.
pub(crate) fn conv<T: Real, C: Tape<T>>(
    t: &mut C,
    x: &C::Value,
    prefix: &str,
    spec: ConvSpec,
) -> Result<C::Value> {
    let w = t.param(&format!("{prefix}.weight"))?;
    let b = t.param(&format!("{prefix}.bias"))?;
    t.conv2d(x, &w, Some(&b), spec).map_err(|e| match e {
        Error::ChannelMismatch { expected, got, .. } => Error::ChannelMismatch {
            layer: String::from(prefix),
            expected,
            got,
        },
        e => e,
    })
}

pub(crate) fn channels<T: Real, C: Tape<T>>(t: &C, x: &C::Value) -> usize {
    t.value(x).shape().get(1).copied().unwrap_or(0)
}

pub(crate) fn expect_channels<T: Real, C: Tape<T>>(
    t: &C,
    x: &C::Value,
    layer: &str,
    expected: usize,
) -> Result<()> {
    let got = channels(t, x);
    if t.value(x).shape().len() != 4 || got != expected {
        return Err(Error::ChannelMismatch {
            layer: String::from(layer),
            expected,
            got,
        });
    }
    Ok(())
}
