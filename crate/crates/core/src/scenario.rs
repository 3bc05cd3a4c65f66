//! The static part of a simulation: layout, antenna pattern and channel.

use crate::antenna::{AntennaArrayConfig, AntennaPattern};
use crate::channel::ChannelModel;
use crate::deployment::NetworkLayout;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub layout: NetworkLayout,
    pub pattern: AntennaPattern,
    pub channel: ChannelModel,
}

impl Scenario {
    pub fn new(layout: NetworkLayout, antenna: &AntennaArrayConfig, channel: ChannelModel) -> Result<Self> {
        Ok(Self {
            layout,
            pattern: AntennaPattern::synthesize(antenna)?,
            channel,
        })
    }

    pub fn bs_height(&self) -> f64 {
        self.layout.sites[0].antenna_height
    }
}
