//! Page-granular virtual memory: reserved regions carved into chunks whose
//! protection changes one way, from writable to executable.

use std::ptr;

use super::LinkError;

pub fn page_size() -> usize {
    // SAFETY: sysconf has no memory-safety preconditions.
    let p = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if p <= 0 {
        4096
    } else {
        p as usize
    }
}

pub fn round_up(n: usize, to: usize) -> usize {
    n.div_ceil(to) * to
}

fn os_error(what: &str) -> LinkError {
    LinkError::Memory(format!("{}: {}", what, std::io::Error::last_os_error()))
}

/// An anonymous mapping owned until drop.
#[derive(Debug)]
pub struct Mapping {
    base: *mut u8,
    len: usize,
}

impl Mapping {
    /// Maps `len` bytes with the given protection, lazily committed.
    pub fn new(len: usize, prot: libc::c_int) -> Result<Mapping, LinkError> {
        let len = round_up(len.max(1), page_size());
        // SAFETY: anonymous private mapping at a kernel-chosen address.
        let p = unsafe {
            libc::mmap(
                ptr::null_mut(),
                len,
                prot,
                libc::MAP_PRIVATE | libc::MAP_ANONYMOUS | libc::MAP_NORESERVE,
                -1,
                0,
            )
        };
        if p == libc::MAP_FAILED {
            return Err(os_error("mmap"));
        }
        Ok(Mapping {
            base: p as *mut u8,
            len,
        })
    }

    pub fn base(&self) -> u64 {
        self.base as u64
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, addr: u64, bytes: usize) -> bool {
        addr >= self.base()
            && addr
                .checked_add(bytes as u64)
                .is_some_and(|end| end <= self.base() + self.len as u64)
    }

    /// Changes protection of the page range covering `[addr, addr + len)`.
    pub fn protect(&self, addr: u64, len: usize, prot: libc::c_int) -> Result<(), LinkError> {
        assert!(self.contains(addr, len) && addr as usize % page_size() == 0);
        // SAFETY: the range lies inside this mapping and is page-aligned.
        let r =
            unsafe { libc::mprotect(addr as *mut libc::c_void, round_up(len, page_size()), prot) };
        if r != 0 {
            return Err(os_error("mprotect"));
        }
        Ok(())
    }
}

impl Drop for Mapping {
    fn drop(&mut self) {
        // SAFETY: unmaps exactly the range mapped in `new`.
        unsafe {
            libc::munmap(self.base as *mut libc::c_void, self.len);
        }
    }
}

/// A reserved range handed out in page-aligned chunks, never reused.
#[derive(Debug)]
pub struct Region {
    map: Mapping,
    used: usize,
}

impl Region {
    /// Reserves `len` bytes with no access rights.
    pub fn reserve(len: usize) -> Result<Region, LinkError> {
        Ok(Region {
            map: Mapping::new(len, libc::PROT_NONE)?,
            used: 0,
        })
    }

    /// Takes the next `len` bytes, rounded to whole pages, and makes them
    /// readable and writable.
    pub fn take(&mut self, len: usize) -> Result<u64, LinkError> {
        let len = round_up(len.max(1), page_size());
        if self.used + len > self.map.len() {
            return Err(LinkError::RegionFull);
        }
        let at = self.map.base() + self.used as u64;
        self.map
            .protect(at, len, libc::PROT_READ | libc::PROT_WRITE)?;
        self.used += len;
        Ok(at)
    }

    pub fn seal(&self, addr: u64, len: usize) -> Result<(), LinkError> {
        self.map
            .protect(addr, len.max(1), libc::PROT_READ | libc::PROT_EXEC)
    }

    pub fn base(&self) -> u64 {
        self.map.base()
    }

    /// True when `[addr, addr + bytes)` lies in chunks already handed out.
    pub fn contains(&self, addr: u64, bytes: usize) -> bool {
        addr >= self.base()
            && addr
                .checked_add(bytes as u64)
                .is_some_and(|end| end <= self.base() + self.used as u64)
    }
}
