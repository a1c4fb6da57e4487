// Look up ratings in the built-in App Store policy table and combine them.
//
// ```text
// cargo run --example policy_lookup
// ```

use maturity_rater::policy::{combine_ratings, ContentCategory, IntensityLevel, PolicyTable, RatingLevel};

pub fn run_example() -> Result<RatingLevel, Box<dyn std::error::Error>> {
    let table = PolicyTable::builtin();
    println!("{:>4}  {:<38} {:<8} rating", "rule", "category", "level");
    for rule in table.rules() {
        println!(
            "{:>4}  {:<38} {:<8} {}",
            rule.row,
            rule.category.label(),
            rule.intensity.as_str(),
            rule.rating
        );
    }

    let findings = [
        (ContentCategory::CartoonOrFantasyViolence, IntensityLevel::Mild),
        (ContentCategory::ProfanityOrCrudeHumor, IntensityLevel::Intense),
        (ContentCategory::SimulatedGambling, IntensityLevel::Mild),
    ];
    let mut ratings = Vec::new();
    for (category, intensity) in findings {
        let rating = table.lookup_rating(category, intensity)?;
        let severity = table.severity_of(category, intensity)?;
        println!("{category} ({intensity}) -> {rating}, severity {severity}");
        ratings.push(rating);
    }
    let overall = combine_ratings(ratings);
    println!("combined: {overall}");

    // intensity-insensitive categories take no intensity
    let err = table.lookup_rating(ContentCategory::GamblingOrContests, IntensityLevel::Mild);
    println!("gambling with an intensity: {}", err.unwrap_err());
    Ok(overall)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
