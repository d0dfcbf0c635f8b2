//! Prints the dist1/dist2 orderings and their mixed-window counts.
use eegconn::connectivity::{build_ordering, hemisphere_mask, mixed_window_count, OrderingMethod};
use eegconn::io::ElectrodeLayout;

fn main() {
    let layout = ElectrodeLayout::deap32();
    for m in [OrderingMethod::Dist1, OrderingMethod::Dist2] {
        let o = build_ordering(m, &layout).unwrap();
        let mask = hemisphere_mask(&o, &layout).unwrap();
        println!("{m}: {}", o.names().join(" "));
        println!("{m} mixed 3x3 windows: {}", mixed_window_count(&mask));
    }
}
