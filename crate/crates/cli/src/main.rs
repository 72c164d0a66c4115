fn main() {
    println!("recon");
}
