//! The external adapter protocol: one JSON object per line each way, starting
//! with a handshake. Here the "adapter" is an in-memory script so the
//! exchange is visible; a real adapter is a process named by the
//! TOPICSHIFT_ADAPTER environment variable.
//!
//! ```text
//! cargo run --example adapter_protocol
//! ```

use std::io::Cursor;

use topicshift::adapter::{self, AdapterClient, AdapterLink, Request};

fn main() -> topicshift::Result<()> {
    let responses = [
        r#"{"protocol":1,"genres":["news","review"],"ops":["generate","train","predict"]}"#,
        r#"{"text":"The album, released on Friday, features new guitar work."}"#,
        r#"{"labels":["review","news"]}"#,
        r#"{"error":"model not loaded"}"#,
    ]
    .join("\n");

    let mut client = AdapterClient::connect(Cursor::new(responses.into_bytes()), Vec::new())?;
    println!("capabilities: {:?}", client.capabilities());
    let text = adapter::generate(&mut client, "news", &["album".into(), "guitar".into()], 40, 3)?;
    println!("generated: {text}");
    let labels = adapter::predict(&mut client, &["great album".into(), "council vote".into()])?;
    println!("labels: {labels:?}");
    match adapter::predict(&mut client, &["again".into()]) {
        Err(e) => println!("error responses surface as errors: {e}"),
        Ok(_) => unreachable!("scripted error"),
    }

    let (_, sent) = client.into_parts();
    println!("requests sent:");
    for line in String::from_utf8_lossy(&sent).lines() {
        println!("  {line}");
    }
    println!("a generate request on the wire: {}", Request::Generate {
        genre: "news".into(),
        keywords: vec!["album".into()],
        max_tokens: 10,
        seed: 1,
    }
    .to_line()
    .trim_end());
    Ok(())
}
