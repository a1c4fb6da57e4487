// Show the chat-completions body the HTTP backend would send for an
// intensity question about one screenshot. Nothing is sent.
//
// ```text
// cargo run --example inspect_http_request
// ```

use std::path::PathBuf;

use maturity_rater::model::{encode_image, request_body, ModelRequest, DEFAULT_MAX_SIDE};
use maturity_rater::policy::ContentCategory;
use maturity_rater::prompts::render_intensity_prompt;

pub fn run_example() -> Result<serde_json::Value, Box<dyn std::error::Error>> {
    let shot = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/screenshots/shark_0.png");
    let image = encode_image(&shot, DEFAULT_MAX_SIDE)?;
    let request = ModelRequest {
        model_id: "gpt-4o".into(),
        temperature: 0.0,
        prompt: render_intensity_prompt(ContentCategory::RealisticViolence)?,
        images: vec![image],
        max_tokens: 64,
    };
    println!("{}", request.summary());
    let mut body = request_body(&request);
    // shorten the data URL for display
    if let Some(url) = body.pointer_mut("/messages/0/content/1/image_url/url") {
        let s = url.as_str().unwrap_or_default();
        *url = format!("{}...", &s[..s.len().min(40)]).into();
    }
    println!("{}", serde_json::to_string_pretty(&body)?);
    Ok(body)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
