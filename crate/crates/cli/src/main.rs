fn main() {
    println!("sgsov");
}
