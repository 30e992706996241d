// Copyright 2026 The encommons Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! JSON-lines journal. Recovery replays every entry in order; a torn final
//! line left by a crash is truncated away.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::instance::Subscription;
use super::ota::{OneTimeAuthorization, OtaToken};
use super::store::KeyStoreRecord;
use super::{CommonsError, PhaRecord};
use crate::protocol::IntervalNumber;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub(crate) enum JournalEntry {
    Pha(PhaRecord),
    Ota(OneTimeAuthorization),
    /// Key appends and token consumption commit together.
    Upload {
        token: OtaToken,
        at: IntervalNumber,
        records: Vec<KeyStoreRecord>,
    },
    Replicated {
        records: Vec<KeyStoreRecord>,
    },
    Subscription(Subscription),
    Cursor {
        id: u64,
        cursor: u64,
    },
}

#[derive(Debug)]
pub(crate) struct Journal {
    file: File,
    path: PathBuf,
}

fn storage(path: &Path, e: impl std::fmt::Display) -> CommonsError {
    CommonsError::Storage(format!("{}: {e}", path.display()))
}

impl Journal {
    /// Opens (creating if needed) and returns the entries to replay.
    pub(crate) fn open(path: &Path) -> Result<(Self, Vec<JournalEntry>), CommonsError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| storage(path, e))?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(|e| storage(path, e))?;

        let mut entries = Vec::new();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        for line in text.split_inclusive('\n') {
            offset += line.len();
            let complete = line.ends_with('\n');
            let body = line.trim_end();
            if body.is_empty() {
                good_len = offset;
                continue;
            }
            match serde_json::from_str::<JournalEntry>(body) {
                Ok(e) if complete => {
                    entries.push(e);
                    good_len = offset;
                }
                // Torn tail: parsed or not, an unterminated last line is dropped.
                _ if !complete => break,
                Err(e) => {
                    return Err(storage(path, format!("corrupt journal entry at byte {}: {e}", offset - line.len())))
                }
                Ok(_) => unreachable!(),
            }
        }
        if good_len < text.len() {
            file.set_len(good_len as u64).map_err(|e| storage(path, e))?;
            file.seek(SeekFrom::End(0)).map_err(|e| storage(path, e))?;
        }
        Ok((
            Self {
                file,
                path: path.to_path_buf(),
            },
            entries,
        ))
    }

    pub(crate) fn append(&mut self, entry: &JournalEntry) -> Result<(), CommonsError> {
        let mut line = serde_json::to_vec(entry).map_err(|e| storage(&self.path, e))?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| storage(&self.path, e))?;
        self.file.sync_data().map_err(|e| storage(&self.path, e))
    }
}
