//! Textual `shape:stride` notation, e.g. `((2,2,16),2,1):((1,2,4),64,0)`.
//!
//! Whitespace is ignored and a leading `_` on integers is accepted so the
//! static-integer rendering `((_2,_2),_8):((_1,_2),_4)` parses too.

use std::str::FromStr;

use super::{IntTuple, Layout, LayoutError};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn err(&self, msg: impl Into<String>) -> LayoutError {
        LayoutError::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), LayoutError> {
        match self.peek() {
            Some(b) if b == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected '{}'", c as char))),
        }
    }

    fn tuple(&mut self) -> Result<IntTuple, LayoutError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let mut items = vec![self.tuple()?];
                loop {
                    match self.peek() {
                        Some(b',') => {
                            self.pos += 1;
                            items.push(self.tuple()?);
                        }
                        Some(b')') => {
                            self.pos += 1;
                            return Ok(IntTuple::Tuple(items));
                        }
                        _ => return Err(self.err("expected ',' or ')'")),
                    }
                }
            }
            Some(_) => self.int().map(IntTuple::Int),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn int(&mut self) -> Result<usize, LayoutError> {
        if self.peek() == Some(b'_') {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| LayoutError::Overflow)
    }

    fn finish(&mut self) -> Result<(), LayoutError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.err("trailing input")),
        }
    }
}

impl FromStr for IntTuple {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor {
            bytes: s.as_bytes(),
            pos: 0,
        };
        let t = cur.tuple()?;
        cur.finish()?;
        Ok(t)
    }
}

impl FromStr for Layout {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor {
            bytes: s.as_bytes(),
            pos: 0,
        };
        let shape = cur.tuple()?;
        cur.expect(b':')?;
        let stride = cur.tuple()?;
        cur.finish()?;
        Layout::new(shape, stride)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_printed_forms() {
        let a: Layout = "((2,2,16),2,1):((1,2,4),64,0)".parse().unwrap();
        assert_eq!(a.to_string(), "((2,2,16),2,1):((1,2,4),64,0)");
        let b: Layout = " ( (_2, _2,_2) , _2,_8 ) : ( (_1,_2,_4),_64, _8) "
            .parse()
            .unwrap();
        assert_eq!(b.to_string(), "((2,2,2),2,8):((1,2,4),64,8)");
        let c: Layout = "12:1".parse().unwrap();
        assert_eq!(c, Layout::leaf(12, 1));
        let d: Layout = "(1):(0)".parse().unwrap();
        assert_eq!(d.to_string(), "(1):(0)");
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "",
            "(2,2)",
            "(2,2):",
            "(2,2):(1,2",
            "(2,):(1,)",
            "(2,2):(1,2)x",
            "(a):(1)",
        ] {
            assert!(bad.parse::<Layout>().is_err(), "{bad:?} should fail");
        }
        assert!(matches!(
            "(2,2):(1,(2,4))".parse::<Layout>(),
            Err(LayoutError::Incongruent { .. })
        ));
    }

    fn int_tuple() -> impl Strategy<Value = IntTuple> {
        let leaf = (0usize..300).prop_map(IntTuple::Int);
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop::collection::vec(inner, 1..4).prop_map(IntTuple::Tuple)
        })
    }

    proptest! {
        #[test]
        fn print_parse_roundtrip(t in int_tuple()) {
            let stride = t.map_leaves(&mut |n| IntTuple::Int(n * 3 + 1));
            let layout = Layout::new(t, stride).unwrap();
            let text = layout.to_string();
            let back: Layout = text.parse().unwrap();
            prop_assert_eq!(back.to_string(), text);
            prop_assert_eq!(back, layout);
        }
    }
}
