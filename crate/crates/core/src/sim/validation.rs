use std::collections::VecDeque;

/// Single-server FIFO validation at one committing peer.
///
/// Blocks must be offered in cut order. The caller draws the service time
/// when a block starts and schedules its completion.
#[derive(Debug, Clone, Default)]
pub struct ValidationQueue {
    waiting: VecDeque<usize>,
    in_service: Option<usize>,
}

impl ValidationQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a delivered block; returns it if validation starts now.
    pub fn arrive(&mut self, block: usize) -> Option<usize> {
        if self.in_service.is_none() {
            self.in_service = Some(block);
            Some(block)
        } else {
            self.waiting.push_back(block);
            None
        }
    }

    /// Finishes the block in service; returns the next block to start now.
    pub fn complete(&mut self) -> Option<usize> {
        assert!(self.in_service.is_some(), "no block in service");
        self.in_service = self.waiting.pop_front();
        self.in_service
    }

    pub fn in_service(&self) -> Option<usize> {
        self.in_service
    }

    pub fn queue_len(&self) -> usize {
        self.waiting.len()
    }
}
