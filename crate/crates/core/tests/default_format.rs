// Runs in its own process: the default format is global state.
use openq_core::data::Format;
use openq_core::qobj::{basis, destroy, set_default_format};

#[test]
fn global_default_format_override() {
    assert_eq!(destroy(3).unwrap().format(), Format::Csr);
    assert_eq!(basis(3, 0).unwrap().format(), Format::Dense);
    set_default_format(Some(Format::Dia));
    assert_eq!(destroy(3).unwrap().format(), Format::Dia);
    assert_eq!(basis(3, 0).unwrap().format(), Format::Dia);
    set_default_format(None);
    assert_eq!(destroy(3).unwrap().format(), Format::Csr);
}
