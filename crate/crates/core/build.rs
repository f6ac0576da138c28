use std::process::Command;

fn main() {
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    let rev = Command::new("git")
        .args(["rev-parse", "--short=12", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok());
    if let Some(rev) = rev {
        println!(
            "cargo:rustc-env=GEOFUSE_GIT_REV=v{}-g{}",
            env!("CARGO_PKG_VERSION"),
            rev.trim()
        );
    }
}
