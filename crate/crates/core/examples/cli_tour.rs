//! Drives the command-line front end in-process: compute slices, then ask
//! whether a state may switch hold length.

fn main() {
    let dir = std::env::temp_dir().join("msh-cli-tour");
    let out = dir.to_string_lossy().to_string();
    let code = msh::cli::run(["msh", "sets", "--out", &out, "--force"]);
    println!("sets exit code {code}");
    let archives = out.clone();
    let code = msh::cli::run([
        "msh", "check-switch", "--state", "70,30,25", "--from", "10", "--to", "5", "--archives", &archives, "--out", &out,
    ]);
    println!("check-switch exit code {code}");
}
