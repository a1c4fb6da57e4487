// Print every prompt template, or refresh `docs/prompts.md` with `--write`.
//
// ```text
// cargo run --example render_prompts [-- --write]
// ```

use std::path::PathBuf;

use maturity_rater::policy::PolicyTable;
use maturity_rater::prompts::prompt_catalog;

pub fn catalog_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("docs/prompts.md")
}

pub fn run_example() -> String {
    prompt_catalog(&PolicyTable::builtin())
}

#[allow(dead_code)]
fn main() -> std::io::Result<()> {
    let catalog = run_example();
    if std::env::args().any(|a| a == "--write") {
        let path = catalog_path();
        std::fs::create_dir_all(path.parent().expect("docs dir"))?;
        std::fs::write(&path, &catalog)?;
        println!("wrote {}", path.display());
    } else {
        print!("{catalog}");
    }
    Ok(())
}
