use std::marker::PhantomData;

/// Mutable slice shared across a team, for loops whose iterations write
/// disjoint entries (colored edge groups, one point or edge per iteration).
pub(crate) struct Disjoint<'a, T> {
    ptr: *mut T,
    len: usize,
    _borrow: PhantomData<&'a mut [T]>,
}

unsafe impl<T: Send> Sync for Disjoint<'_, T> {}
unsafe impl<T: Send> Send for Disjoint<'_, T> {}

impl<'a, T> Disjoint<'a, T> {
    pub(crate) fn new(slice: &'a mut [T]) -> Self {
        Self {
            ptr: slice.as_mut_ptr(),
            len: slice.len(),
            _borrow: PhantomData,
        }
    }

    /// # Safety
    /// No other thread may access entry `i` while the returned borrow lives.
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn get(&self, i: usize) -> &mut T {
        assert!(i < self.len);
        &mut *self.ptr.add(i)
    }

    /// # Safety
    /// No thread may write entry `i` while the returned borrow lives.
    pub(crate) unsafe fn read(&self, i: usize) -> &T {
        assert!(i < self.len);
        &*self.ptr.add(i)
    }
}
