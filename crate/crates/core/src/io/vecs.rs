//! fvecs / ivecs files.
//!
//! Each record is a little-endian `i32` dimension `d` followed by `d` little-endian 32-bit
//! values (IEEE-754 floats for fvecs, signed integers for ivecs). Every record in a file
//! shares the same `d`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Catalog, EntityId};

fn parse_records(bytes: &[u8], limit: Option<usize>) -> Result<Vec<&[u8]>> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    let mut dim: Option<i32> = None;
    while offset < bytes.len() && limit.is_none_or(|l| out.len() < l) {
        let Some(head) = bytes.get(offset..offset + 4) else {
            return Err(Error::Parse {
                offset: offset as u64,
                reason: "truncated dimension header".into(),
            });
        };
        let d = i32::from_le_bytes(head.try_into().unwrap());
        if d <= 0 {
            return Err(Error::Parse {
                offset: offset as u64,
                reason: format!("nonpositive dimension {d}"),
            });
        }
        if let Some(expected) = dim {
            if expected != d {
                return Err(Error::Parse {
                    offset: offset as u64,
                    reason: format!("inconsistent dimension {d}, file started with {expected}"),
                });
            }
        }
        dim = Some(d);
        let start = offset + 4;
        let end = start + d as usize * 4;
        let Some(payload) = bytes.get(start..end) else {
            return Err(Error::Parse {
                offset: offset as u64,
                reason: format!("truncated record: need {} payload bytes", d as usize * 4),
            });
        };
        out.push(payload);
        offset = end;
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses fvecs bytes into a catalog with ids `0..n`. Empty input gives an empty catalog
/// whose dimension is undefined.
pub fn parse_fvecs(bytes: &[u8]) -> Result<Catalog> {
    parse_fvecs_limited(bytes, None)
}

fn parse_fvecs_limited(bytes: &[u8], limit: Option<usize>) -> Result<Catalog> {
    let records = parse_records(bytes, limit)?;
    if records.is_empty() {
        return Ok(Catalog::empty());
    }
    let rows = records
        .into_iter()
        .map(|payload| {
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        })
        .collect();
    Catalog::from_rows(rows)
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<Catalog> {
    parse_fvecs(&read_file(path.as_ref())?)
}

/// Reads only the first `n` records, e.g. to subsample a large base file.
pub fn read_fvecs_head(path: impl AsRef<Path>, n: usize) -> Result<Catalog> {
    parse_fvecs_limited(&read_file(path.as_ref())?, Some(n))
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<Vec<Vec<EntityId>>> {
    let mut offset = 0u64;
    parse_records(bytes, None)?
        .into_iter()
        .map(|payload| {
            offset += 4;
            let row = payload
                .chunks_exact(4)
                .map(|c| {
                    let v = i32::from_le_bytes(c.try_into().unwrap());
                    let id = EntityId::try_from(v).map_err(|_| Error::Parse {
                        offset,
                        reason: format!("negative id {v}"),
                    });
                    offset += 4;
                    id
                })
                .collect();
            row
        })
        .collect()
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<EntityId>>> {
    parse_ivecs(&read_file(path.as_ref())?)
}

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_fvecs(catalog: &Catalog, path: impl AsRef<Path>) -> Result<()> {
    let dim = catalog
        .dim()
        .ok_or_else(|| Error::InvalidInput("cannot write an empty catalog".into()))?;
    write_with(path.as_ref(), |w| {
        for r in catalog.records() {
            w.write_all(&(dim as i32).to_le_bytes())?;
            for x in r.embedding.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    })
}

pub fn write_ivecs(rows: &[Vec<EntityId>], path: impl AsRef<Path>) -> Result<()> {
    if let Some(first) = rows.first() {
        if first.is_empty() || rows.iter().any(|r| r.len() != first.len()) {
            return Err(Error::InvalidInput(
                "ivecs rows must be nonempty and share one length".into(),
            ));
        }
    }
    write_with(path.as_ref(), |w| {
        for row in rows {
            w.write_all(&(row.len() as i32).to_le_bytes())?;
            for &id in row {
                w.write_all(&(id as i32).to_le_bytes())?;
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_rows;
    use proptest::prelude::*;

    #[test]
    fn decodes_reference_bytes() {
        let bytes = [2, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40];
        let c = parse_fvecs(&bytes).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.embedding(0).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn empty_file_is_empty_catalog() {
        let c = parse_fvecs(&[]).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.dim(), None);
    }

    #[test]
    fn malformed_inputs_name_offsets() {
        // truncated payload
        let err = parse_fvecs(&[2, 0, 0, 0, 0, 0, 0x80, 0x3F]).unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 0, .. }));
        // nonpositive d
        assert!(matches!(parse_fvecs(&[0, 0, 0, 0]), Err(Error::Parse { offset: 0, .. })));
        // inconsistent d at the second record
        let mut bytes = vec![1, 0, 0, 0, 0, 0, 0x80, 0x3F];
        bytes.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert!(matches!(parse_fvecs(&bytes), Err(Error::Parse { offset: 8, .. })));
        // truncated header
        assert!(matches!(parse_fvecs(&[1, 0]), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn round_trip_random_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.fvecs");
        let catalog = Catalog::from_rows(random_rows(100, 16, 5)).unwrap();
        write_fvecs(&catalog, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 100 * (4 + 64));
        assert_eq!(read_fvecs(&path).unwrap(), catalog);
        assert_eq!(read_fvecs_head(&path, 10).unwrap().len(), 10);
    }

    #[test]
    fn single_zero_vector_is_eight_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.fvecs");
        write_fvecs(&Catalog::from_rows(vec![vec![0.0]]).unwrap(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), vec![1, 0, 0, 0, 0, 0, 0, 0]);
        assert!(write_fvecs(&Catalog::empty(), &path).is_err());
    }

    #[test]
    fn ivecs_round_trip_and_negative_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.ivecs");
        let rows = vec![vec![3, 1, 2], vec![0, 9, 4]];
        write_ivecs(&rows, &path).unwrap();
        assert_eq!(read_ivecs(&path).unwrap(), rows);
        let neg = [1, 0, 0, 0, 0xff, 0xff, 0xff, 0xff];
        assert!(matches!(parse_ivecs(&neg), Err(Error::Parse { offset: 4, .. })));
    }

    proptest! {
        #[test]
        fn fvecs_round_trip_is_bit_exact(
            rows in proptest::collection::vec(
                proptest::collection::vec(
                    prop_oneof![Just(-0.0f32), Just(0.0f32), proptest::num::f32::NORMAL,
                                proptest::num::f32::SUBNORMAL], 3),
                1..20)
        ) {
            let catalog = Catalog::from_rows(rows.clone()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.fvecs");
            write_fvecs(&catalog, &path).unwrap();
            let back = read_fvecs(&path).unwrap();
            for (i, row) in rows.iter().enumerate() {
                let got: Vec<u32> = back.embedding(i).iter().map(|x| x.to_bits()).collect();
                let want: Vec<u32> = row.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(got, want);
            }
        }
    }
}
