//! `--driver` resolution.

use std::path::Path;
use std::sync::Arc;

use turn_core::drivers::{DriverConfig, DriverError, Executor, HttpProvider, InferenceProvider, MockDriver, ReferenceDriver};
use turn_core::host::Host;

/// Accepted forms:
/// - `mock` or `mock:SEED`: the deterministic generator
/// - `reference`: the HTTP reference driver with default settings
/// - a path to a JSON file: a list is a mock script, an object a driver config
pub fn resolve(choice: Option<&str>, host: Arc<Host>) -> Result<Arc<dyn InferenceProvider>, DriverError> {
    let choice = choice.unwrap_or("reference");
    if choice == "mock" {
        return Ok(Arc::new(MockDriver::generator(0)));
    }
    if let Some(seed) = choice.strip_prefix("mock:") {
        let seed = seed
            .parse()
            .map_err(|_| DriverError::Config(format!("mock seed must be an integer, got {seed:?}")))?;
        return Ok(Arc::new(MockDriver::generator(seed)));
    }
    let config = if choice == "reference" {
        DriverConfig::default()
    } else {
        let path = Path::new(choice);
        let text = std::fs::read_to_string(path)
            .map_err(|e| DriverError::Config(format!("unknown driver {choice:?} ({}: {e})", path.display())))?;
        let json: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| DriverError::Config(format!("{}: {e}", path.display())))?;
        if json.is_array() {
            return Ok(Arc::new(MockDriver::script(MockDriver::parse_script(&text)?)));
        }
        serde_json::from_value(json).map_err(|e| DriverError::Config(format!("{}: {e}", path.display())))?
    };
    log::info!("driver {} at {}", config.name, config.endpoint_url);
    Ok(Arc::new(HttpProvider::new(
        Box::new(ReferenceDriver::new(config)),
        Executor::new(host),
    )))
}
