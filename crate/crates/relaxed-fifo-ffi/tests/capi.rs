//! Exercises the C ABI the way a foreign binding would: through raw
//! pointers, status codes, and out-parameters.

use std::ptr;

use relaxed_fifo_ffi::*;

#[test]
fn blockfifo_round_trip() {
    unsafe {
        let mut queue: *mut RfBlockFifo = ptr::null_mut();
        assert_eq!(
            rf_blockfifo_new(2, 1, 7, 3, 42, true, &mut queue),
            RfStatus::Ok
        );
        let mut capacity = 0usize;
        assert_eq!(rf_blockfifo_capacity(queue, &mut capacity), RfStatus::Ok);
        assert_eq!(capacity, 3 * 2 * 7);

        let mut handle: *mut RfBlockFifoHandle = ptr::null_mut();
        assert_eq!(rf_blockfifo_handle_new(queue, 0, &mut handle), RfStatus::Ok);

        for v in [1u64, 2, 3] {
            assert_eq!(rf_blockfifo_push(handle, v), RfStatus::Ok);
        }
        let mut out = 0u64;
        assert_eq!(rf_blockfifo_pop(handle, &mut out), RfStatus::Ok);
        assert_eq!(out, 1);
        assert_eq!(rf_blockfifo_pop(handle, &mut out), RfStatus::Ok);
        assert_eq!(rf_blockfifo_pop(handle, &mut out), RfStatus::Ok);
        assert_eq!(rf_blockfifo_pop(handle, &mut out), RfStatus::Empty);

        rf_blockfifo_handle_free(handle);
        rf_blockfifo_free(queue);
    }
}

#[test]
fn blockfifo_full_and_sentinel() {
    unsafe {
        let mut queue: *mut RfBlockFifo = ptr::null_mut();
        assert_eq!(
            rf_blockfifo_new(1, 1, 2, 3, 1, true, &mut queue),
            RfStatus::Ok
        );
        let mut handle: *mut RfBlockFifoHandle = ptr::null_mut();
        assert_eq!(rf_blockfifo_handle_new(queue, 0, &mut handle), RfStatus::Ok);

        assert_eq!(rf_blockfifo_push(handle, RF_EMPTY_VALUE), RfStatus::InvalidArgument);
        let mut pushed = 0;
        while rf_blockfifo_push(handle, pushed) == RfStatus::Ok {
            pushed += 1;
            assert!(pushed < 100);
        }
        assert!(pushed >= 4, "the ring should hold at least two blocks");

        rf_blockfifo_handle_free(handle);
        rf_blockfifo_free(queue);
    }
}

#[test]
fn blockfifo_rejects_bad_parameters() {
    unsafe {
        let mut queue: *mut RfBlockFifo = ptr::null_mut();
        assert_eq!(
            rf_blockfifo_new(0, 1, 7, 3, 1, true, &mut queue),
            RfStatus::InvalidArgument
        );
        assert_eq!(
            rf_blockfifo_new(1, 1, 0, 3, 1, true, &mut queue),
            RfStatus::InvalidArgument
        );
        assert_eq!(
            rf_blockfifo_new(1, 1, 7, 2, 1, true, &mut queue),
            RfStatus::InvalidArgument
        );
        assert_eq!(
            rf_blockfifo_new(1, 1, 7, 3, 1, true, ptr::null_mut()),
            RfStatus::NullPointer
        );
        // a handle id beyond the thread bound is caught, not unwound
        assert_eq!(rf_blockfifo_new(1, 1, 7, 3, 1, true, &mut queue), RfStatus::Ok);
        let mut handle: *mut RfBlockFifoHandle = ptr::null_mut();
        assert_eq!(
            rf_blockfifo_handle_new(queue, 9, &mut handle),
            RfStatus::InternalError
        );
        rf_blockfifo_free(queue);
    }
}

#[test]
fn multififo_round_trip_and_expectation() {
    unsafe {
        let mut queue: *mut RfMultiFifo = ptr::null_mut();
        assert_eq!(rf_multififo_new(1, 2, 1, 16, 7, &mut queue), RfStatus::Ok);
        let mut capacity = 0usize;
        assert_eq!(rf_multififo_capacity(queue, &mut capacity), RfStatus::Ok);
        assert_eq!(capacity, 32);

        let mut handle: *mut RfMultiFifoHandle = ptr::null_mut();
        assert_eq!(rf_multififo_handle_new(queue, 0, &mut handle), RfStatus::Ok);
        for v in 10..16u64 {
            assert_eq!(rf_multififo_push(handle, v), RfStatus::Ok);
        }
        // c * p = 2: the two-choice pop sees both heads, order is exact
        for v in 10..16u64 {
            let mut out = 0u64;
            assert_eq!(rf_multififo_pop(handle, &mut out), RfStatus::Ok);
            assert_eq!(out, v);
        }
        let mut out = 0u64;
        assert_eq!(rf_multififo_pop(handle, &mut out), RfStatus::Empty);
        assert_eq!(rf_multififo_push(handle, RF_EMPTY_VALUE), RfStatus::InvalidArgument);

        rf_multififo_handle_free(handle);
        rf_multififo_free(queue);

        assert!((rf_multififo_expected_rank_error(2, 8) - 12.34375).abs() < 1e-12);
    }
}

#[test]
fn strict_round_trip() {
    unsafe {
        let mut queue: *mut RfStrictQueue = ptr::null_mut();
        assert_eq!(rf_strict_new(2, &mut queue), RfStatus::Ok);
        assert_eq!(rf_strict_push(queue, 5), RfStatus::Ok);
        assert_eq!(rf_strict_push(queue, 6), RfStatus::Ok);
        assert_eq!(rf_strict_push(queue, 7), RfStatus::Full);
        let mut out = 0u64;
        assert_eq!(rf_strict_pop(queue, &mut out), RfStatus::Ok);
        assert_eq!(out, 5);
        assert_eq!(rf_strict_pop(queue, &mut out), RfStatus::Ok);
        assert_eq!(rf_strict_pop(queue, &mut out), RfStatus::Empty);
        assert_eq!(rf_strict_push(ptr::null(), 1), RfStatus::NullPointer);
        rf_strict_free(queue);
    }
}

#[test]
fn queue_shared_across_threads_through_handles() {
    unsafe {
        let mut queue: *mut RfBlockFifo = ptr::null_mut();
        assert_eq!(
            rf_blockfifo_new(4, 1, 63, 16, 3, true, &mut queue),
            RfStatus::Ok
        );
        let queue_addr = queue as usize;
        let mut joins = Vec::new();
        for tid in 0..4usize {
            joins.push(std::thread::spawn(move || {
                let queue = queue_addr as *mut RfBlockFifo;
                let mut handle: *mut RfBlockFifoHandle = ptr::null_mut();
                assert_eq!(rf_blockfifo_handle_new(queue, tid, &mut handle), RfStatus::Ok);
                let mut popped = 0u64;
                for i in 0..10_000u64 {
                    assert_eq!(
                        rf_blockfifo_push(handle, (tid as u64) << 32 | i),
                        RfStatus::Ok
                    );
                    let mut out = 0u64;
                    if rf_blockfifo_pop(handle, &mut out) == RfStatus::Ok {
                        popped += 1;
                    }
                }
                rf_blockfifo_handle_free(handle);
                popped
            }));
        }
        let mut total_popped: u64 = 0;
        for join in joins {
            total_popped += join.join().unwrap();
        }
        // drain the rest single-threaded and account for every element
        let mut handle: *mut RfBlockFifoHandle = ptr::null_mut();
        assert_eq!(rf_blockfifo_handle_new(queue, 0, &mut handle), RfStatus::Ok);
        let mut out = 0u64;
        while rf_blockfifo_pop(handle, &mut out) == RfStatus::Ok {
            total_popped += 1;
        }
        assert_eq!(total_popped, 4 * 10_000);
        rf_blockfifo_handle_free(handle);
        rf_blockfifo_free(queue);
    }
}
