use serde::{Deserialize, Serialize};

pub const DEFAULT_ROBOT_NAME: &str = "the_robot";

const INTRO: &str = "\
You are a friendly and attentive service agent.
You control a physical robot called '{robot}' and receive requests from the user.
You have access to functions for gathering information, acting physically, and speaking out loud.
You receive two types of inputs from the user:
    Speech input: The user will verbally ask for help.
    Gaze history: This is divided into segments, each showing the objects the user likely focused on while uttering the speech input and the duration of that focused period (seconds). Some segments may include multiple objects ordered by decreasing likelihood (closer objects are mixed).";

pub const RULES: [&str; 6] = [
    "Always start gathering all available information related to the request from the scene and the input.",
    "Always focus on understanding the user's intent based on context, speech input, and gaze history. Use gaze to clarify speech, when requests are ambiguous. Use speech to clarify gaze, when requests are ambiguous.",
    "Provide a reason for every response to user requests using the 'reasoning' function to explain decisions. Be concise and clear.",
    "Speak out loud using the 'speak' function to communicate clearly and concisely with the user.",
    "If you are not sure about the user's intent, ask for clarification.",
    "Provide the 'required_objects' for every user request.",
];

pub const GAZE_TIPS: [&str; 3] = [
    "Referred objects are usually gazed ahead of utterance, but also right before looking at you.",
    "Intentionally referred objects are usually looked at longer and more frequently.",
    "Spurious fixations are usually short and mixed with closer objects.",
];

/// Phrase used to announce the robot name; scripted backends read it back.
pub(crate) const ROBOT_NAME_MARKER: &str = "You control a physical robot called '";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemPromptConfig {
    pub robot_name: String,
    pub include_gaze_tips: bool,
}

impl Default for SystemPromptConfig {
    fn default() -> Self {
        Self {
            robot_name: DEFAULT_ROBOT_NAME.to_string(),
            include_gaze_tips: true,
        }
    }
}

impl SystemPromptConfig {
    pub fn render(&self) -> String {
        default_system_prompt(self)
    }
}

pub fn default_system_prompt(config: &SystemPromptConfig) -> String {
    let mut out = INTRO.replace("{robot}", &config.robot_name);
    out.push_str("\nIMPORTANT: Obey the following rules:");
    for (i, rule) in RULES.iter().enumerate() {
        out.push_str(&format!("\n{}. {rule}", i + 1));
    }
    if config.include_gaze_tips {
        out.push_str("\nREMEMBER YOUR RULES!! TIPS FOR INTERPRETING GAZE:");
        for (i, tip) in GAZE_TIPS.iter().enumerate() {
            out.push_str(&format!("\n{}. {tip}", i + 1));
        }
    } else {
        out.push_str("\nREMEMBER YOUR RULES!!");
    }
    out
}

/// Reads the robot name back out of a rendered system prompt.
pub(crate) fn robot_name_from_prompt(prompt: &str) -> Option<&str> {
    let start = prompt.find(ROBOT_NAME_MARKER)? + ROBOT_NAME_MARKER.len();
    let len = prompt[start..].find('\'')?;
    Some(&prompt[start..start + len])
}
