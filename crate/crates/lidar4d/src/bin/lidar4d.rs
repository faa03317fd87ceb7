use clap::Parser;

fn main() {
    let cli = lidar4d::cli::Cli::parse();
    std::process::exit(lidar4d::cli::run(cli));
}
