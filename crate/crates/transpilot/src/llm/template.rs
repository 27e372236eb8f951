//! Prompt skeletons with named slots.
//!
//! Slots are written `{{name}}` in the skeleton. Rendering substitutes
//! every slot from the provided map and fails on any slot left
//! unfilled; substituted values are never rescanned, so code containing
//! brace runs cannot be mistaken for a slot. Templates carry their
//! worked one-shot example, prepended as a user/assistant turn pair in
//! every rendered request.

use crate::error::{Error, Result};

use super::{ChatRequest, DecodeParams, Message, Role};

/// A worked example pair shown to the model before the real prompt.
#[derive(Debug, Clone, Copy)]
pub struct OneShot {
    pub user: &'static str,
    pub assistant: &'static str,
}

/// A named prompt skeleton; see the module docs for slot syntax.
#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub system: &'static str,
    pub skeleton: &'static str,
    pub one_shot: Option<OneShot>,
}

impl PromptTemplate {
    /// Substitute `slots` into the skeleton and wrap the result in a
    /// request carrying this template's name and system text.
    pub fn render(&self, slots: &[(&str, &str)]) -> Result<ChatRequest> {
        let text = self.fill(slots)?;
        let mut messages = Vec::new();
        if let Some(shot) = &self.one_shot {
            messages.push(Message {
                role: Role::User,
                text: shot.user.to_string(),
            });
            messages.push(Message {
                role: Role::Assistant,
                text: shot.assistant.to_string(),
            });
        }
        messages.push(Message {
            role: Role::User,
            text,
        });
        Ok(ChatRequest {
            template: self.name.to_string(),
            system: self.system.to_string(),
            messages,
            decode: DecodeParams::default(),
        })
    }

    fn fill(&self, slots: &[(&str, &str)]) -> Result<String> {
        let mut out = String::with_capacity(self.skeleton.len());
        let mut rest = self.skeleton;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else {
                // A stray `{{` with no closer is literal skeleton text.
                out.push_str(&rest[start..]);
                rest = "";
                break;
            };
            let key = &after[..end];
            match slots.iter().find(|(k, _)| *k == key) {
                Some((_, value)) => out.push_str(value),
                None => {
                    return Err(Error::MissingSlot {
                        template: self.name.to_string(),
                        name: key.to_string(),
                    })
                }
            }
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}
