use crate::assets::{AssetError, SYSTEM_PROMPT};

/// The system prompt given to the policy, byte-identical to the pinned asset.
pub fn render_system_prompt() -> Result<&'static str, AssetError> {
    SYSTEM_PROMPT.load()
}
