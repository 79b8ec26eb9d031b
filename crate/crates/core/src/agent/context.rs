use crate::assets::SYSTEM_PROMPT;
use crate::chat::{ChatMessage, ContentPart, Usage};

/// Character-based token estimate: one token per four characters, rounded up.
pub fn text_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub fn system_prompt_tokens() -> u64 {
    text_tokens(SYSTEM_PROMPT.text)
}

/// Estimated context size of a conversation.
///
/// `history` excludes the system prompt, whose cost is always included.
/// When the provider reported usage for the conversation, that figure is
/// returned unchanged.
pub fn estimate_context_tokens(history: &[ChatMessage], reported: Option<Usage>, image_token_cost: u64) -> u64 {
    if let Some(usage) = reported {
        return usage.total();
    }
    system_prompt_tokens() + parts_tokens(history, image_token_cost)
}

pub(crate) fn parts_tokens(messages: &[ChatMessage], image_token_cost: u64) -> u64 {
    messages
        .iter()
        .flat_map(|m| &m.content)
        .map(|p| match p {
            ContentPart::Text(t) => text_tokens(t),
            ContentPart::Image(_) => image_token_cost,
        })
        .sum()
}
