macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $name() {
            $name::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(views_and_patterns, "views_and_patterns.rs");
example!(multiplicative_layers, "multiplicative_layers.rs");
example!(low_rank_layers, "low_rank_layers.rs");
example!(layer_codec, "layer_codec.rs");
example!(fdl_synthesis, "fdl_synthesis.rs");
example!(hierarchical_coding, "hierarchical_coding.rs");
example!(rd_report, "rd_report.rs");
example!(external_codec, "external_codec.rs");
