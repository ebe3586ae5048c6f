//! Versioned design file holding observer and controller designs.

use serde::{Deserialize, Serialize};

use crate::controller::ControllerDesign;
use crate::error::{Error, Result};
use crate::observer::ObserverDesign;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub schema_version: u32,
    pub plant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverDesign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerDesign>,
}

impl DesignFile {
    pub fn new(plant: impl Into<String>, observer: Option<ObserverDesign>, controller: Option<ControllerDesign>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            plant: plant.into(),
            observer,
            controller,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: DesignFile = serde_json::from_str(s)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "design schema_version {} is not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::design_from_poles;
    use crate::model::FasSignature;
    use num_complex::Complex64;

    #[test]
    fn controller_round_trip() {
        let sig = FasSignature::single(3, 1).unwrap();
        let poles: Vec<Complex64> = [-2.0, -3.0, -4.0].iter().map(|&p| Complex64::new(p, 0.0)).collect();
        let ctrl = design_from_poles(&sig, &[poles], None).unwrap();
        let file = DesignFile::new("electromech", None, Some(ctrl));
        let back = DesignFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn wrong_version_rejected() {
        let err = DesignFile::from_json(r#"{"schema_version": 7, "plant": "x"}"#).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn malformed_json_names_location() {
        let err = DesignFile::from_json("{\"schema_version\": 1,\n \"plant\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
