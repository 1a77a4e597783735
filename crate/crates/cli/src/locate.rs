//! Maps JSON pointers back to source lines so that validation errors found
//! after parsing can still name a line.

/// 1-based line on which the value at `pointer` starts, if the text is
/// well-formed enough to reach it.
pub fn line_of(text: &str, pointer: &str) -> Option<usize> {
    let target: Vec<String> = if pointer.is_empty() {
        Vec::new()
    } else {
        pointer
            .trim_start_matches('/')
            .split('/')
            .map(|t| t.replace("~1", "/").replace("~0", "~"))
            .collect()
    };
    let mut scan = Scanner {
        bytes: text.as_bytes(),
        pos: 0,
        line: 1,
    };
    scan.value(&mut Vec::new(), &target)
}

/// Escapes one pointer token.
pub fn token(raw: &str) -> String {
    raw.replace('~', "~0").replace('/', "~1")
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl Scanner<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        if b == b'\n' {
            self.line += 1;
        }
        self.pos += 1;
        Some(b)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.bump();
        }
    }

    fn string(&mut self) -> Option<String> {
        if self.bump()? != b'"' {
            return None;
        }
        let start = self.pos;
        loop {
            match self.bump()? {
                b'\\' => {
                    self.bump()?;
                }
                b'"' => break,
                _ => {}
            }
        }
        serde_json::from_slice(&self.bytes[start - 1..self.pos]).ok()
    }

    /// Scans one value; returns the target's line once it is reached.
    fn value(&mut self, path: &mut Vec<String>, target: &[String]) -> Option<usize> {
        self.skip_ws();
        if path.as_slice() == target {
            return Some(self.line);
        }
        match self.peek()? {
            b'{' => {
                self.bump();
                loop {
                    self.skip_ws();
                    if self.peek()? == b'}' {
                        self.bump();
                        return None;
                    }
                    let key = self.string()?;
                    self.skip_ws();
                    if self.bump()? != b':' {
                        return None;
                    }
                    path.push(key);
                    let found = self.value(path, target);
                    path.pop();
                    if found.is_some() {
                        return found;
                    }
                    self.skip_ws();
                    if self.bump()? != b',' {
                        return None;
                    }
                }
            }
            b'[' => {
                self.bump();
                let mut index = 0usize;
                loop {
                    self.skip_ws();
                    if self.peek()? == b']' {
                        self.bump();
                        return None;
                    }
                    path.push(index.to_string());
                    let found = self.value(path, target);
                    path.pop();
                    if found.is_some() {
                        return found;
                    }
                    index += 1;
                    self.skip_ws();
                    if self.bump()? != b',' {
                        return None;
                    }
                }
            }
            b'"' => {
                self.string()?;
                None
            }
            _ => {
                while !matches!(
                    self.peek(),
                    None | Some(b',' | b']' | b'}' | b' ' | b'\t' | b'\r' | b'\n')
                ) {
                    self.bump();
                }
                None
            }
        }
    }
}
