fn main() {
    let cfg = lamsym::RunConfig::default();
    for r in lamsym::corpus::run_all(&cfg).unwrap() {
        print!("{}", r.to_text());
    }
}
