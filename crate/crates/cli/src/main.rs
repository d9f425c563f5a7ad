use clap::Parser;
use orthext_cli::app::{run, Cli};

fn main() {
    let out = run(Cli::parse());
    if let Some(err) = out.json.get("error").and_then(|e| e.as_str()) {
        eprintln!("orthext: {err}");
    }
    println!("{}", serde_json::to_string_pretty(&out.json).expect("json"));
    std::process::exit(out.code);
}
